"""Scene-graph documents: parsing, serialization, conflicts, graph metrics.

Documents are YAML with a fixed schema::

    scene_label: bedroom
    canvas: {width: 1024, height: 1024}
    objects:
      - {id: bed, size_in: [80, 60, 24], attributes: [bed]}
    edges:
      - {rel: left-of, subject: lamp, object: bed}

Unary edges use ``object: scene``. Parsing walks the YAML node tree directly
so that semantic errors (unknown relation, dangling id, duplicate edge) carry
the line/column of the offending element, not just syntax errors.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import yaml

from .errors import GraphParseError
from .scene import (SCENE, Canvas, ObjectSpec, RelationEdge, RelationType,
                    SceneGraph, relation_from_name)

# Relations where r(A,B) and r(B,A) cannot both hold. The strict set mirrors
# the subset checked in the reference evaluation protocol; the default adds
# top-of, which is antisymmetric by construction of its predicate.
ANTISYMMETRIC_STRICT = frozenset({RelationType.IN, RelationType.IN_FRONT_OF, RelationType.LEFT_OF})
ANTISYMMETRIC_DEFAULT = ANTISYMMETRIC_STRICT | {RelationType.TOP_OF}

ANTISYMMETRIC_DUPLICATE = "antisymmetric-duplicate"
PROXIMITY_CONTRADICTION = "proximity-contradiction"


@dataclass(frozen=True)
class Conflict:
    kind: str
    first: RelationEdge
    second: RelationEdge

    def __str__(self):
        return f"{self.kind}: {self.first} vs {self.second}"


@dataclass(frozen=True)
class ConflictReport:
    conflicts: Tuple[Conflict, ...]

    def __bool__(self):
        return bool(self.conflicts)

    def __len__(self):
        return len(self.conflicts)

    def __iter__(self):
        return iter(self.conflicts)


def _mark(node):
    m = node.start_mark
    return m.line + 1, m.column + 1


def _fail(node, message):
    line, col = _mark(node)
    raise GraphParseError(message, line=line, column=col)


def _expect_mapping(node, what):
    if not isinstance(node, yaml.MappingNode):
        _fail(node, f"{what} must be a mapping")
    return [(k.value, v) for k, v in node.value]


def _expect_sequence(node, what):
    if not isinstance(node, yaml.SequenceNode):
        _fail(node, f"{what} must be a sequence")
    return node.value


def _scalar(node, what):
    if not isinstance(node, yaml.ScalarNode):
        _fail(node, f"{what} must be a scalar")
    return node.value


def _number(node, what):
    raw = _scalar(node, what)
    try:
        return float(raw)
    except ValueError:
        _fail(node, f"{what} must be a number, got {raw!r}")


def parse(text: str) -> SceneGraph:
    """Parse a graph document, raising GraphParseError with position info."""
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        if mark is not None:
            raise GraphParseError(str(getattr(exc, "problem", exc)),
                                  line=mark.line + 1, column=mark.column + 1) from exc
        raise GraphParseError(str(exc)) from exc
    if root is None:
        raise GraphParseError("empty document", line=1, column=1)

    top = dict()
    for key, value in _expect_mapping(root, "document"):
        top[key] = value

    for required in ("canvas", "objects"):
        if required not in top:
            _fail(root, f"missing top-level key '{required}'")

    scene_label = _scalar(top["scene_label"], "scene_label") if "scene_label" in top else ""

    canvas_fields = dict(_expect_mapping(top["canvas"], "canvas"))
    for required in ("width", "height"):
        if required not in canvas_fields:
            _fail(top["canvas"], f"canvas missing '{required}'")
    try:
        canvas = Canvas(width=int(_number(canvas_fields["width"], "canvas.width")),
                        height=int(_number(canvas_fields["height"], "canvas.height")))
    except ValueError as exc:
        _fail(top["canvas"], str(exc))

    objects: List[ObjectSpec] = []
    seen_ids = set()
    for obj_node in _expect_sequence(top["objects"], "objects"):
        fields = dict(_expect_mapping(obj_node, "object entry"))
        if "id" not in fields or "size_in" not in fields:
            _fail(obj_node, "object entry requires 'id' and 'size_in'")
        oid = _scalar(fields["id"], "object id")
        if oid in seen_ids:
            _fail(fields["id"], f"duplicate object id '{oid}'")
        seen_ids.add(oid)
        size_nodes = _expect_sequence(fields["size_in"], "size_in")
        if len(size_nodes) != 3:
            _fail(fields["size_in"], "size_in must have exactly 3 entries [w, l, h]")
        size = tuple(_number(n, "size_in entry") for n in size_nodes)
        attrs = []
        if "attributes" in fields:
            attrs = [_scalar(n, "attribute") for n in _expect_sequence(fields["attributes"], "attributes")]
        try:
            objects.append(ObjectSpec(id=oid, size=size, attributes=tuple(attrs)))
        except ValueError as exc:
            _fail(obj_node, str(exc))

    edges: List[RelationEdge] = []
    seen_edges = set()
    if "edges" in top:
        for edge_node in _expect_sequence(top["edges"], "edges"):
            fields = dict(_expect_mapping(edge_node, "edge entry"))
            for required in ("rel", "subject", "object"):
                if required not in fields:
                    _fail(edge_node, f"edge entry requires '{required}'")
            rel_name = _scalar(fields["rel"], "rel")
            try:
                rel = relation_from_name(rel_name)
            except ValueError as exc:
                _fail(fields["rel"], str(exc))
            subject = _scalar(fields["subject"], "subject")
            target = _scalar(fields["object"], "object")
            if subject not in seen_ids:
                _fail(fields["subject"], f"edge references undeclared object '{subject}'")
            if target != SCENE and target not in seen_ids:
                _fail(fields["object"], f"edge references undeclared object '{target}'")
            try:
                edge = RelationEdge(relation=rel, subject=subject, object=target)
            except ValueError as exc:
                _fail(edge_node, str(exc))
            if edge.key() in seen_edges:
                _fail(edge_node, f"duplicate edge {edge}")
            seen_edges.add(edge.key())
            edges.append(edge)

    try:
        return SceneGraph(objects=tuple(objects), edges=tuple(edges),
                          canvas=canvas, scene_label=scene_label)
    except ValueError as exc:
        _fail(root, str(exc))


def graph_to_mapping(g: SceneGraph) -> dict:
    """Plain-dict form of a graph in canonical order (objects by id,
    edges by (relation, subject, object))."""
    return {
        "scene_label": g.scene_label,
        "canvas": {"width": g.canvas.width, "height": g.canvas.height},
        "objects": [
            {"id": o.id, "size_in": list(o.size), "attributes": list(o.attributes)}
            for o in sorted(g.objects, key=lambda o: o.id)
        ],
        "edges": [
            {"rel": e.relation.value, "subject": e.subject, "object": e.object}
            for e in sorted(g.edges, key=lambda e: e.key())
        ],
    }


def graph_from_mapping(m: dict) -> SceneGraph:
    """Inverse of graph_to_mapping for already-decoded structures."""
    canvas = Canvas(width=int(m["canvas"]["width"]), height=int(m["canvas"]["height"]))
    objects = tuple(
        ObjectSpec(id=o["id"], size=tuple(o["size_in"]), attributes=tuple(o.get("attributes", ())))
        for o in m["objects"]
    )
    edges = tuple(
        RelationEdge(relation=relation_from_name(e["rel"]), subject=e["subject"], object=e["object"])
        for e in m.get("edges", ())
    )
    return SceneGraph(objects=objects, edges=edges, canvas=canvas,
                      scene_label=m.get("scene_label", ""))


def serialize(g: SceneGraph) -> str:
    """Canonical YAML document; parse(serialize(g)) is structurally equal to g."""
    return yaml.safe_dump(graph_to_mapping(g), sort_keys=False, default_flow_style=None)


def detect_conflicts(g: SceneGraph, strict: bool = False) -> ConflictReport:
    """Pairs of edges that cannot hold simultaneously.

    Checks (i) both orientations of an antisymmetric relation on one
    unordered pair, (ii) close-to together with away-from on one unordered
    pair. ``strict`` limits (i) to the reference protocol's relation subset.
    """
    antisym = ANTISYMMETRIC_STRICT if strict else ANTISYMMETRIC_DEFAULT
    conflicts = []
    edges = sorted(g.edges, key=lambda e: e.key())
    by_directed = {(e.relation, e.subject, e.object): e for e in edges}
    seen_pairs = set()
    for e in edges:
        if e.relation in antisym:
            reverse = by_directed.get((e.relation, e.object, e.subject))
            if reverse is not None:
                pair_key = (e.relation, frozenset((e.subject, e.object)))
                if pair_key not in seen_pairs:
                    seen_pairs.add(pair_key)
                    conflicts.append(Conflict(ANTISYMMETRIC_DUPLICATE, e, reverse))
    proximity_seen = set()
    for e in edges:
        if e.relation is RelationType.CLOSE_TO:
            pair = frozenset((e.subject, e.object))
            for other in edges:
                if other.relation is RelationType.AWAY_FROM and frozenset((other.subject, other.object)) == pair:
                    if pair not in proximity_seen:
                        proximity_seen.add(pair)
                        conflicts.append(Conflict(PROXIMITY_CONTRADICTION, e, other))
    return ConflictReport(conflicts=tuple(conflicts))


def relationship_coverage(g: SceneGraph) -> float:
    """Distinct relation types used, over the 10-type vocabulary."""
    return len(g.relation_types()) / len(RelationType)


def mean_degree(g: SceneGraph) -> float:
    """Average edges per node: binary edges touch two nodes, unary one."""
    if not g.objects:
        raise ValueError("mean_degree requires at least one object")
    binary = sum(1 for e in g.edges if e.relation.is_binary)
    unary = len(g.edges) - binary
    return (2 * binary + unary) / len(g.objects)
