import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from layoutdiff.errors import (PlannerResponseError, PlannerTransportError,
                               PlannerValidationError, UnresolvableSizeError)
from layoutdiff.graphio import detect_conflicts, graph_to_mapping
from layoutdiff.planner import (EndpointConfig, PlanRequest, RequestObject,
                                mock_plan, remote_plan, request_from_mapping,
                                request_to_mapping, response_to_mapping)
from layoutdiff.scene import RelationType


def bedroom_request():
    return PlanRequest(scene_label="bedroom", objects=(
        RequestObject(id="bed0", attributes=("bed",)),
        RequestObject(id="lamp0", attributes=("lamp",)),
    ))


class TestMockPlan:
    def test_template_relations_and_coverage(self):
        resp = mock_plan(bedroom_request(), seed=0)
        g = resp.graph
        assert set(g.object_ids) == {"bed0", "lamp0"}
        rels = {(e.relation, e.subject, e.object) for e in g.edges}
        assert (RelationType.CLOSE_TO, "lamp0", "bed0") in rels
        unary = [e for e in g.edges if e.relation.is_unary]
        assert len(unary) == 2
        assert not detect_conflicts(g)

    def test_sizes_filled_from_archetypes(self):
        resp = mock_plan(bedroom_request(), seed=0)
        assert resp.graph.spec_of("bed0").size == (80.0, 60.0, 24.0)
        assert resp.graph.spec_of("lamp0").size == (8.0, 8.0, 24.0)

    def test_given_size_respected(self):
        req = PlanRequest(scene_label="bedroom", objects=(
            RequestObject(id="bed0", size=(70, 50, 20), attributes=("bed",)),
            RequestObject(id="lamp0", attributes=("lamp",)),
        ))
        assert mock_plan(req).graph.spec_of("bed0").size == (70.0, 50.0, 20.0)

    def test_deterministic(self):
        a = mock_plan(bedroom_request(), seed=4)
        b = mock_plan(bedroom_request(), seed=4)
        assert a.graph == b.graph
        assert a.refined_prompt == b.refined_prompt

    def test_unknown_archetype_without_size(self):
        req = PlanRequest(scene_label="bedroom", objects=(
            RequestObject(id="gizmo0", attributes=("gizmo",)),))
        with pytest.raises(UnresolvableSizeError, match="gizmo"):
            mock_plan(req)

    def test_prompt_names_edges(self):
        resp = mock_plan(bedroom_request(), seed=0)
        assert "bedroom" in resp.refined_prompt
        assert "close-to" in resp.refined_prompt

    def test_tag_fallback_from_id(self):
        req = PlanRequest(scene_label="bedroom", objects=(
            RequestObject(id="bed3"), RequestObject(id="lamp7")))
        resp = mock_plan(req)
        assert resp.graph.spec_of("bed3").size == (80.0, 60.0, 24.0)

    def test_all_fixture_scenes_plan_cleanly(self):
        import yaml
        from importlib import resources
        fixtures = resources.files("layoutdiff.data").joinpath("fixtures")
        count = 0
        for entry in sorted(fixtures.iterdir()):
            req = request_from_mapping(yaml.safe_load(entry.read_text()))
            resp = mock_plan(req, seed=0)
            assert not detect_conflicts(resp.graph)
            assert set(resp.graph.object_ids) == {o.id for o in req.objects}
            binary = [e for e in resp.graph.edges if e.relation.is_binary]
            assert binary, f"{req.scene_label}: template produced no relations"
            count += 1
        assert count == 4

    def test_request_mapping_round_trip(self):
        req = bedroom_request()
        again = request_from_mapping(request_to_mapping(req))
        assert again == req


class _StubHandler(BaseHTTPRequestHandler):
    response_builder = None

    def do_POST(self):
        length = int(self.headers["Content-Length"])
        body = json.loads(self.rfile.read(length)) if length else {}
        status, payload = type(self).response_builder(self.path, body)
        data = payload if isinstance(payload, bytes) else json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture
def stub_server():
    server = HTTPServer(("127.0.0.1", 0), _StubHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield server
    server.shutdown()
    thread.join(timeout=2)


def _endpoint(server):
    return EndpointConfig(url=f"http://127.0.0.1:{server.server_address[1]}",
                          timeout=5.0)


class TestRemotePlan:
    def test_well_formed_response_accepted(self, stub_server):
        good = mock_plan(bedroom_request(), seed=0)

        def build(path, body):
            assert path == "/plan"
            assert body["scene_label"] == "bedroom"
            return 200, {"graph": graph_to_mapping(good.graph),
                         "refined_prompt": "hand-written plan"}

        _StubHandler.response_builder = staticmethod(build)
        resp = remote_plan(bedroom_request(), _endpoint(stub_server))
        assert resp.graph == good.graph
        assert resp.refined_prompt == "hand-written plan"

    def test_conflicting_graph_rejected_with_report(self, stub_server):
        good = mock_plan(bedroom_request(), seed=0).graph
        m = graph_to_mapping(good)
        m["edges"].append({"rel": "left-of", "subject": "bed0", "object": "lamp0"})
        m["edges"].append({"rel": "left-of", "subject": "lamp0", "object": "bed0"})

        _StubHandler.response_builder = staticmethod(lambda p, b: (200, {"graph": m}))
        with pytest.raises(PlannerValidationError) as exc:
            remote_plan(bedroom_request(), _endpoint(stub_server))
        assert exc.value.conflicts is not None
        assert len(exc.value.conflicts) == 1

    def test_missing_object_rejected(self, stub_server):
        good = mock_plan(bedroom_request(), seed=0).graph
        m = graph_to_mapping(good)
        m["objects"] = [o for o in m["objects"] if o["id"] != "lamp0"]
        m["edges"] = [e for e in m["edges"]
                      if "lamp0" not in (e["subject"], e["object"])]

        _StubHandler.response_builder = staticmethod(lambda p, b: (200, {"graph": m}))
        with pytest.raises(PlannerValidationError, match="lamp0"):
            remote_plan(bedroom_request(), _endpoint(stub_server))

    def test_malformed_body_distinct_error(self, stub_server):
        _StubHandler.response_builder = staticmethod(
            lambda p, b: (200, b"this is not json"))
        with pytest.raises(PlannerResponseError):
            remote_plan(bedroom_request(), _endpoint(stub_server))

    def test_http_error_is_transport_error(self, stub_server):
        _StubHandler.response_builder = staticmethod(
            lambda p, b: (500, {"error": "boom"}))
        with pytest.raises(PlannerTransportError):
            remote_plan(bedroom_request(), _endpoint(stub_server))

    def test_unreachable_endpoint(self):
        cfg = EndpointConfig(url="http://127.0.0.1:1", timeout=0.5)
        with pytest.raises(PlannerTransportError):
            remote_plan(bedroom_request(), cfg)

    def test_response_mapping_round_trip(self):
        resp = mock_plan(bedroom_request(), seed=0)
        m = response_to_mapping(resp)
        assert m["refined_prompt"] == resp.refined_prompt
        assert m["graph"]["scene_label"] == "bedroom"

    def test_timeout_env_fallback(self, monkeypatch):
        from layoutdiff.planner import TIMEOUT_ENV
        cfg = EndpointConfig(url="http://example.invalid")
        monkeypatch.setenv(TIMEOUT_ENV, "2.5")
        assert cfg.effective_timeout() == 2.5
        monkeypatch.delenv(TIMEOUT_ENV)
        assert cfg.effective_timeout() == 10.0
        assert EndpointConfig(url="x", timeout=1.0).effective_timeout() == 1.0
