"""Canonical domain types: objects, relations, scene graphs, layouts.

Everything here is immutable value data; coordinates live in normalized
canvas units where (0, 0) is the top-left corner and (1, 1) the bottom-right
(image convention: y grows downward).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence, Tuple

# Sentinel target of unary relation edges.
SCENE = "scene"


class RelationType(Enum):
    IN_SCENE = "in-scene"
    RIGHT_IN_SCENE = "right-in-scene"
    LEFT_IN_SCENE = "left-in-scene"
    IN = "in"
    LEFT_OF = "left-of"
    TOP_OF = "top-of"
    CLOSE_TO = "close-to"
    AWAY_FROM = "away-from"
    OVERLAPPING = "overlapping"
    IN_FRONT_OF = "in-front-of"

    @property
    def is_unary(self) -> bool:
        return self in _UNARY

    @property
    def is_binary(self) -> bool:
        return not self.is_unary

    def __str__(self) -> str:
        return self.value


_UNARY = {RelationType.IN_SCENE, RelationType.RIGHT_IN_SCENE, RelationType.LEFT_IN_SCENE}

# Stable integer ids, used by the model parameter store and the kernels.
RELATION_INDEX = {rel: i for i, rel in enumerate(RelationType)}

_BY_VALUE = {rel.value: rel for rel in RelationType}


def relation_from_name(name: str) -> RelationType:
    try:
        return _BY_VALUE[name]
    except KeyError:
        raise ValueError(f"unknown relation '{name}'") from None


@dataclass(frozen=True)
class ObjectSpec:
    """An object's identity, physical size (inches) and free-form tags."""

    id: str
    size: Tuple[float, float, float]  # (width, length, height)
    attributes: Tuple[str, ...] = ()

    def __post_init__(self):
        if not self.id:
            raise ValueError("object id must be nonempty")
        if self.id == SCENE:
            raise ValueError(f"object id '{SCENE}' is reserved")
        if len(self.size) != 3:
            raise ValueError("size must be a (width, length, height) triple")
        for d in self.size:
            if not (math.isfinite(d) and d > 0):
                raise ValueError(f"object '{self.id}': dimensions must be positive and finite, got {self.size}")
        object.__setattr__(self, "size", tuple(float(d) for d in self.size))
        object.__setattr__(self, "attributes", tuple(self.attributes))


@dataclass(frozen=True)
class Canvas:
    width: int
    height: int

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"canvas dimensions must be positive, got {self.width}x{self.height}")


@dataclass(frozen=True)
class RelationEdge:
    relation: RelationType
    subject: str
    object: str  # object id, or SCENE for unary relations

    def __post_init__(self):
        if self.relation.is_unary:
            if self.object != SCENE:
                raise ValueError(f"unary relation {self.relation} must target '{SCENE}', got '{self.object}'")
        else:
            if self.object == SCENE:
                raise ValueError(f"binary relation {self.relation} cannot target the scene")
            if self.object == self.subject:
                raise ValueError(f"binary relation {self.relation} cannot relate '{self.subject}' to itself")

    def key(self) -> Tuple[str, str, str]:
        """Canonical sort/dedup key."""
        return (self.relation.value, self.subject, self.object)

    def __str__(self) -> str:
        return f"{self.relation}({self.subject}, {self.object})"


@dataclass(frozen=True)
class SceneGraph:
    """Objects + relation edges + canvas.

    Objects and edges are stored in canonical order (objects by id, edges by
    (relation, subject, object)), so equality is structural and every
    traversal downstream is deterministic regardless of input order.
    """

    objects: Tuple[ObjectSpec, ...]
    edges: Tuple[RelationEdge, ...]
    canvas: Canvas
    scene_label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(sorted(self.objects, key=lambda o: o.id)))
        object.__setattr__(self, "edges", tuple(sorted(self.edges, key=lambda e: e.key())))
        ids = [o.id for o in self.objects]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate object id(s): {', '.join(dupes)}")
        declared = set(ids)
        seen = set()
        for e in self.edges:
            if e.subject not in declared:
                raise ValueError(f"edge {e} references undeclared object '{e.subject}'")
            if e.object != SCENE and e.object not in declared:
                raise ValueError(f"edge {e} references undeclared object '{e.object}'")
            if e.key() in seen:
                raise ValueError(f"duplicate edge {e}")
            seen.add(e.key())

    @property
    def object_ids(self) -> Tuple[str, ...]:
        return tuple(o.id for o in self.objects)

    def spec_of(self, object_id: str) -> ObjectSpec:
        for o in self.objects:
            if o.id == object_id:
                return o
        raise KeyError(object_id)

    def relation_types(self) -> set:
        return {e.relation for e in self.edges}


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box: center and extent in normalized canvas units."""

    center: Tuple[float, float]
    extent: Tuple[float, float]

    def __post_init__(self):
        if self.extent[0] <= 0 or self.extent[1] <= 0:
            raise ValueError(f"box extent must be positive, got {self.extent}")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "extent", (float(self.extent[0]), float(self.extent[1])))

    @property
    def left(self) -> float:
        return self.center[0] - self.extent[0] / 2

    @property
    def right(self) -> float:
        return self.center[0] + self.extent[0] / 2

    @property
    def top(self) -> float:
        return self.center[1] - self.extent[1] / 2

    @property
    def bottom(self) -> float:
        return self.center[1] + self.extent[1] / 2

    def pixel_corners(self, canvas: Canvas):
        """(left, top, right, bottom) in pixels."""
        return (self.left * canvas.width, self.top * canvas.height,
                self.right * canvas.width, self.bottom * canvas.height)

    @staticmethod
    def from_pixel_corners(corners, canvas: Canvas) -> "BoundingBox":
        l, t, r, b = corners
        cx = (l + r) / 2 / canvas.width
        cy = (t + b) / 2 / canvas.height
        ew = (r - l) / canvas.width
        eh = (b - t) / canvas.height
        return BoundingBox(center=(cx, cy), extent=(ew, eh))


@dataclass(frozen=True)
class Layout:
    """One bounding box per object of a scene graph."""

    boxes: Mapping[str, BoundingBox]
    canvas: Canvas

    def __post_init__(self):
        object.__setattr__(self, "boxes", dict(self.boxes))

    def __getitem__(self, object_id: str) -> BoundingBox:
        return self.boxes[object_id]

    def __contains__(self, object_id: str) -> bool:
        return object_id in self.boxes

    def covers(self, graph: SceneGraph) -> bool:
        return all(oid in self.boxes for oid in graph.object_ids)


# Fraction of the canvas the largest object may occupy per axis (auto_ppi).
MAX_EXTENT_FRACTION = 0.4


def derive_extent(spec: ObjectSpec, canvas: Canvas, ppi: float) -> Tuple[float, float]:
    """Orthographic 2D footprint of an object: width -> ew, height -> eh.

    Length (depth) plays no geometric role in the 2D projection.
    """
    if ppi <= 0:
        raise ValueError(f"ppi must be positive, got {ppi}")
    w_in, _l_in, h_in = spec.size
    return (w_in * ppi / canvas.width, h_in * ppi / canvas.height)


def auto_ppi(specs: Sequence[ObjectSpec], canvas: Canvas,
             max_fraction: float = MAX_EXTENT_FRACTION) -> float:
    """Largest pixels-per-inch scale keeping every extent <= max_fraction.

    The bound is tight on at least one object axis.
    """
    if not specs:
        raise ValueError("auto_ppi requires at least one object")
    max_w = max(s.size[0] for s in specs)
    max_h = max(s.size[2] for s in specs)
    return min(max_fraction * canvas.width / max_w,
               max_fraction * canvas.height / max_h)
