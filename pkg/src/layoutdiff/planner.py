"""Planner seam: request/response contract, offline mock, remote client.

The mock fills in missing sizes from the archetype table and instantiates
relation edges from per-scene templates; the remote client posts the same
wire schema to an HTTP endpoint and validates the returned plan before
letting it downstream.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from importlib import resources
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import requests
import yaml

from .errors import (PlannerResponseError, PlannerTransportError,
                     PlannerValidationError, UnresolvableSizeError)
from .graphio import detect_conflicts, graph_from_mapping, graph_to_mapping
from .scene import (SCENE, Canvas, ObjectSpec, RelationEdge, RelationType,
                    SceneGraph, relation_from_name)
from .synth import load_archetypes

TIMEOUT_ENV = "LAYOUTDIFF_PLAN_TIMEOUT"
DEFAULT_TIMEOUT = 10.0


@dataclass(frozen=True)
class RequestObject:
    id: str
    size: Optional[Tuple[float, float, float]] = None
    attributes: Tuple[str, ...] = ()

    def tag(self) -> str:
        """Archetype tag: first attribute, else the id minus trailing digits."""
        if self.attributes:
            return self.attributes[0]
        return self.id.rstrip("0123456789-_") or self.id


@dataclass(frozen=True)
class PlanRequest:
    scene_label: str
    objects: Tuple[RequestObject, ...]
    canvas: Canvas = Canvas(1024, 1024)

    def __post_init__(self):
        if not self.objects:
            raise ValueError("plan request needs at least one object")
        object.__setattr__(self, "objects", tuple(self.objects))


@dataclass(frozen=True)
class PlanResponse:
    graph: SceneGraph
    refined_prompt: str


def load_templates() -> Dict[str, List[dict]]:
    text = resources.files("layoutdiff.data").joinpath("scene_templates.yaml").read_text()
    return yaml.safe_load(text)


def request_to_mapping(req: PlanRequest) -> dict:
    return {
        "scene_label": req.scene_label,
        "canvas": {"width": req.canvas.width, "height": req.canvas.height},
        "objects": [
            {"id": o.id,
             **({"size_in": list(o.size)} if o.size is not None else {}),
             "attributes": list(o.attributes)}
            for o in req.objects
        ],
    }


def request_from_mapping(m: dict) -> PlanRequest:
    canvas = Canvas(int(m["canvas"]["width"]), int(m["canvas"]["height"])) \
        if "canvas" in m else Canvas(1024, 1024)
    objects = tuple(
        RequestObject(id=o["id"],
                      size=tuple(o["size_in"]) if "size_in" in o else None,
                      attributes=tuple(o.get("attributes", ())))
        for o in m["objects"])
    return PlanRequest(scene_label=m.get("scene_label", ""), objects=objects,
                       canvas=canvas)


def response_to_mapping(resp: PlanResponse) -> dict:
    return {"graph": graph_to_mapping(resp.graph),
            "refined_prompt": resp.refined_prompt}


def _resolve_sizes(req: PlanRequest):
    table = load_archetypes()
    resolved = []
    for o in req.objects:
        if o.size is not None:
            size = o.size
        else:
            tag = o.tag()
            if tag not in table:
                raise UnresolvableSizeError(
                    f"object '{o.id}': no size given and no archetype for tag '{tag}'")
            size = table[tag]
        attrs = o.attributes if o.attributes else (o.tag(),)
        resolved.append(ObjectSpec(id=o.id, size=size, attributes=attrs))
    return resolved


def _prompt_for(scene_label: str, objects: Sequence[ObjectSpec],
                edges: Sequence[RelationEdge]) -> str:
    names = ", ".join(o.id for o in objects)
    parts = [f"A {scene_label} scene containing {names}."]
    rel_edges = [e for e in edges if e.relation.is_binary]
    if rel_edges:
        clauses = "; ".join(f"{e.subject} is {e.relation.value} {e.object}"
                            for e in sorted(rel_edges, key=lambda e: e.key()))
        parts.append(f"Arrangement: {clauses}.")
    parts.append("All objects are fully inside the scene.")
    return " ".join(parts)


def mock_plan(req: PlanRequest, seed: int = 0) -> PlanResponse:
    """Deterministic offline plan: archetype sizes + template relations.

    Every object gets an in-scene edge; binary edges come from the scene
    template matched on object tag pairs. The seed breaks ties when several
    template rules could fire for one pair (at most one is kept).
    """
    objects = _resolve_sizes(req)
    templates = load_templates().get(req.scene_label, [])
    rng = np.random.default_rng(seed)

    edges = [RelationEdge(relation=RelationType.IN_SCENE, subject=o.id, object=SCENE)
             for o in objects]
    tags = [ro.tag() for ro in req.objects]
    seen_pairs = set()
    for i in range(len(objects)):
        for j in range(i + 1, len(objects)):
            a, b = objects[i], objects[j]
            tag_a, tag_b = tags[i], tags[j]
            candidates = [rule for rule in templates
                          if {tag_a, tag_b} == set(rule["pair"])]
            if not candidates:
                continue
            rule = candidates[0] if len(candidates) == 1 else \
                candidates[int(rng.integers(len(candidates)))]
            subj, obj = (a, b) if tag_a == rule["subject"] else (b, a)
            pair_key = frozenset((subj.id, obj.id))
            if pair_key in seen_pairs:
                continue
            seen_pairs.add(pair_key)
            edges.append(RelationEdge(relation=relation_from_name(rule["rel"]),
                                      subject=subj.id, object=obj.id))

    graph = SceneGraph(objects=tuple(objects), edges=tuple(edges),
                       canvas=req.canvas, scene_label=req.scene_label)
    report = detect_conflicts(graph)
    assert not report, f"template produced conflicts: {list(report)}"
    return PlanResponse(graph=graph,
                        refined_prompt=_prompt_for(req.scene_label, objects, edges))


@dataclass(frozen=True)
class EndpointConfig:
    url: str
    timeout: Optional[float] = None  # falls back to LAYOUTDIFF_PLAN_TIMEOUT

    def effective_timeout(self) -> float:
        if self.timeout is not None:
            return self.timeout
        return float(os.environ.get(TIMEOUT_ENV, DEFAULT_TIMEOUT))


def validate_plan(graph: SceneGraph, req: PlanRequest) -> None:
    report = detect_conflicts(graph)
    if report:
        raise PlannerValidationError(
            f"planner returned a conflicting graph: {'; '.join(str(c) for c in report)}",
            conflicts=report)
    returned = set(graph.object_ids)
    missing = [o.id for o in req.objects if o.id not in returned]
    if missing:
        raise PlannerValidationError(
            f"planner response does not cover requested objects: {missing}")


def remote_plan(req: PlanRequest, endpoint: EndpointConfig) -> PlanResponse:
    """POST the request to the endpoint's /plan route and validate the reply.

    Transport failures, malformed documents and invalid plans are reported
    as distinct errors; an invalid graph never propagates downstream.
    """
    url = endpoint.url.rstrip("/") + "/plan"
    try:
        http = requests.post(url, json=request_to_mapping(req),
                             timeout=endpoint.effective_timeout())
        http.raise_for_status()
    except requests.RequestException as exc:
        raise PlannerTransportError(f"plan request to {url} failed: {exc}") from exc
    try:
        body = http.json()
        graph = graph_from_mapping(body["graph"])
        prompt = body.get("refined_prompt", "")
    except Exception as exc:  # noqa: BLE001 - anything malformed
        raise PlannerResponseError(f"malformed planner response: {exc}") from exc
    validate_plan(graph, req)
    return PlanResponse(graph=graph, refined_prompt=prompt)
