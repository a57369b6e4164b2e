import math

import pytest

from layoutdiff.scene import (SCENE, BoundingBox, Canvas, Layout, ObjectSpec,
                              RelationEdge, RelationType, SceneGraph,
                              auto_ppi, derive_extent)

from conftest import box, make_graph


class TestObjectSpec:
    def test_valid(self):
        spec = ObjectSpec(id="bed", size=(80, 60, 24), attributes=("bed",))
        assert spec.size == (80.0, 60.0, 24.0)

    @pytest.mark.parametrize("size", [(0, 1, 1), (1, -2, 1), (1, 1, float("inf")),
                                      (1, 1, float("nan"))])
    def test_rejects_bad_dimensions(self, size):
        with pytest.raises(ValueError):
            ObjectSpec(id="x", size=size)

    def test_rejects_empty_and_reserved_id(self):
        with pytest.raises(ValueError):
            ObjectSpec(id="", size=(1, 1, 1))
        with pytest.raises(ValueError):
            ObjectSpec(id=SCENE, size=(1, 1, 1))


class TestRelationType:
    def test_arity_split(self):
        unary = {r for r in RelationType if r.is_unary}
        assert unary == {RelationType.IN_SCENE, RelationType.RIGHT_IN_SCENE,
                         RelationType.LEFT_IN_SCENE}
        assert all(r.is_binary for r in RelationType if r not in unary)
        assert len(list(RelationType)) == 10


class TestRelationEdge:
    def test_unary_must_target_scene(self):
        with pytest.raises(ValueError):
            RelationEdge(relation=RelationType.IN_SCENE, subject="a", object="b")

    def test_binary_must_not_target_scene_or_self(self):
        with pytest.raises(ValueError):
            RelationEdge(relation=RelationType.LEFT_OF, subject="a", object=SCENE)
        with pytest.raises(ValueError):
            RelationEdge(relation=RelationType.LEFT_OF, subject="a", object="a")


class TestSceneGraph:
    def test_rejects_dangling_reference(self):
        with pytest.raises(ValueError, match="undeclared"):
            make_graph([("a", (1, 1, 1))], [("left-of", "a", "ghost")])

    def test_rejects_duplicate_edge(self):
        with pytest.raises(ValueError, match="duplicate edge"):
            make_graph([("a", (1, 1, 1)), ("b", (1, 1, 1))],
                       [("left-of", "a", "b"), ("left-of", "a", "b")])

    def test_rejects_duplicate_object_id(self):
        with pytest.raises(ValueError, match="duplicate object"):
            make_graph([("a", (1, 1, 1)), ("a", (2, 2, 2))], [])


class TestDeriveExtent:
    def test_maps_width_and_height(self):
        spec = ObjectSpec(id="x", size=(64, 999, 32))
        assert derive_extent(spec, Canvas(1024, 1024), ppi=8) == (0.5, 0.25)

    def test_full_canvas(self):
        spec = ObjectSpec(id="x", size=(128, 1, 128))
        assert derive_extent(spec, Canvas(1024, 1024), ppi=8) == (1.0, 1.0)

    def test_rejects_nonpositive_ppi(self):
        spec = ObjectSpec(id="x", size=(10, 10, 10))
        with pytest.raises(ValueError):
            derive_extent(spec, Canvas(1024, 1024), ppi=0)


class TestAutoPpi:
    # Expected values solved by hand from the binding constraint
    # ppi = 0.4 * canvas / max_dim before implementation.
    def test_single_wide_object(self):
        specs = [ObjectSpec(id="x", size=(102.4, 10, 50))]
        assert auto_ppi(specs, Canvas(1024, 1024)) == pytest.approx(4.0)

    def test_two_objects(self):
        specs = [ObjectSpec(id="x", size=(51.2, 10, 20)),
                 ObjectSpec(id="y", size=(30, 10, 40))]
        assert auto_ppi(specs, Canvas(1024, 1024)) == pytest.approx(8.0)

    def test_empty_list_rejected(self):
        with pytest.raises(ValueError):
            auto_ppi([], Canvas(1024, 1024))

    def test_bound_tight_on_some_axis(self):
        # The binding object's extent must equal the limit fraction.
        import numpy as np
        rng = np.random.default_rng(7)
        canvas = Canvas(1024, 768)
        for _ in range(50):
            specs = [ObjectSpec(id=f"o{i}", size=tuple(rng.uniform(2, 120, size=3)))
                     for i in range(rng.integers(1, 6))]
            ppi = auto_ppi(specs, canvas)
            extents = [derive_extent(s, canvas, ppi) for s in specs]
            assert all(ew <= 0.4 + 1e-12 and eh <= 0.4 + 1e-12 for ew, eh in extents)
            assert any(math.isclose(max(ew, eh), 0.4, rel_tol=1e-12)
                       for ew, eh in extents)


class TestBoundingBox:
    def test_pixel_round_trip_exact_for_binary_fractions(self):
        canvas = Canvas(1024, 1024)
        b = box(0.5, 0.25, 0.125, 0.0625)
        again = BoundingBox.from_pixel_corners(b.pixel_corners(canvas), canvas)
        assert again == b

    def test_pixel_round_trip_tolerance(self):
        import numpy as np
        canvas = Canvas(1000, 900)
        rng = np.random.default_rng(3)
        for _ in range(200):
            b = box(*rng.uniform(0.05, 0.95, 2), *rng.uniform(0.01, 0.4, 2))
            again = BoundingBox.from_pixel_corners(b.pixel_corners(canvas), canvas)
            assert math.isclose(again.center[0], b.center[0], abs_tol=1e-9)
            assert math.isclose(again.center[1], b.center[1], abs_tol=1e-9)
            assert math.isclose(again.extent[0], b.extent[0], abs_tol=1e-9)
            assert math.isclose(again.extent[1], b.extent[1], abs_tol=1e-9)

    def test_rejects_nonpositive_extent(self):
        with pytest.raises(ValueError):
            BoundingBox(center=(0.5, 0.5), extent=(0.0, 0.1))


class TestLayout:
    def test_covers(self, two_object_graph, two_object_layout):
        assert two_object_layout.covers(two_object_graph)
        partial = Layout(boxes={"bed": box(0.5, 0.5)}, canvas=two_object_graph.canvas)
        assert not partial.covers(two_object_graph)
