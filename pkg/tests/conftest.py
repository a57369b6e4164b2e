import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from layoutdiff.scene import (BoundingBox, Canvas, Layout, ObjectSpec,
                              RelationEdge, RelationType, SceneGraph, SCENE)


def box(cx, cy, ew=0.2, eh=0.2):
    return BoundingBox(center=(cx, cy), extent=(ew, eh))


def make_graph(objects, edges, canvas=None, label="test"):
    """objects: [(id, (w,l,h))], edges: [(rel_name, subj, obj)]."""
    canvas = canvas or Canvas(1024, 1024)
    specs = tuple(ObjectSpec(id=i, size=s, attributes=(i.rstrip("0123456789-_"),))
                  for i, s in objects)
    rel_edges = tuple(
        RelationEdge(relation=RelationType(r), subject=s, object=o)
        for r, s, o in edges)
    return SceneGraph(objects=specs, edges=rel_edges, canvas=canvas, scene_label=label)


@pytest.fixture
def canvas():
    return Canvas(1024, 1024)


@pytest.fixture
def two_object_graph(canvas):
    return make_graph(
        objects=[("bed", (80.0, 60.0, 30.0)), ("lamp", (8.0, 8.0, 24.0))],
        edges=[("in-scene", "bed", SCENE), ("in-scene", "lamp", SCENE),
               ("left-of", "lamp", "bed")],
        canvas=canvas, label="bedroom")


@pytest.fixture
def two_object_layout(canvas):
    return Layout(boxes={"bed": box(0.6, 0.5, 0.3, 0.25),
                         "lamp": box(0.2, 0.4, 0.05, 0.1)}, canvas=canvas)
