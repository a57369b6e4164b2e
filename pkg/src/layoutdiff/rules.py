"""Spatial relation predicates and their smooth energy surrogates.

Each relation has an exact boolean rule over bounding boxes plus a
nonnegative energy that is exactly zero when the rule holds with margin and
grows linearly with the violation distance. Energies are C1: a quadratic
ramp of width 1/sharpness blends the flat region into the linear branch, so
gradients are defined everywhere and zero energy implies the predicate
holds.

All comparisons are strict; exact ties evaluate false.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Tuple

from .scene import Layout, RelationEdge, RelationType, SceneGraph

DEFAULT_MARGIN = 0.02
DEFAULT_SHARPNESS = 50.0


@dataclass(frozen=True)
class RuleConfig:
    """Distance thresholds, as fractions of canvas width (normalized units)."""

    close_threshold: float = 0.25
    away_threshold: float = 0.50

    def __post_init__(self):
        if not (0 < self.close_threshold < self.away_threshold <= math.sqrt(2)):
            raise ValueError(
                f"need 0 < close_threshold < away_threshold <= sqrt(2), "
                f"got {self.close_threshold}, {self.away_threshold}")


def _boxes(edge: RelationEdge, layout: Layout):
    if edge.subject not in layout:
        raise ValueError(f"layout has no box for '{edge.subject}'")
    a = layout[edge.subject]
    if edge.relation.is_unary:
        return a, None
    if edge.object not in layout:
        raise ValueError(f"layout has no box for '{edge.object}'")
    return a, layout[edge.object]


def holds(edge: RelationEdge, layout: Layout, cfg: RuleConfig = RuleConfig()) -> bool:
    """Evaluate the exact rule for one edge against a layout."""
    a, b = _boxes(edge, layout)
    rel = edge.relation
    if rel is RelationType.IN_SCENE:
        return 0 < a.left and a.right < 1 and 0 < a.top and a.bottom < 1
    if rel is RelationType.RIGHT_IN_SCENE:
        return a.right < 1 and a.right > 0.5
    if rel is RelationType.LEFT_IN_SCENE:
        return a.left > 0 and a.left < 0.5
    if rel is RelationType.IN:
        return (b.left < a.left and a.right < b.right
                and b.top < a.top and a.bottom < b.bottom)
    if rel is RelationType.LEFT_OF:
        return a.center[0] < b.center[0]
    if rel in (RelationType.TOP_OF, RelationType.IN_FRONT_OF):
        # in-front-of shares top-of's rule: smaller vertical center is
        # higher up in image coordinates.
        return a.center[1] < b.center[1]
    if rel is RelationType.CLOSE_TO:
        return _center_distance(a, b) < cfg.close_threshold
    if rel is RelationType.AWAY_FROM:
        return _center_distance(a, b) > cfg.away_threshold
    if rel is RelationType.OVERLAPPING:
        return (min(a.right, b.right) - max(a.left, b.left) > 0
                and min(a.bottom, b.bottom) - max(a.top, b.top) > 0)
    raise AssertionError(f"unhandled relation {rel}")


def _center_distance(a, b) -> float:
    dx = a.center[0] - b.center[0]
    dy = a.center[1] - b.center[1]
    return math.hypot(dx, dy)


def _hinge(v: float, margin: float, delta: float) -> Tuple[float, float]:
    """C1 hinge on a violation measure v (rule satisfied with margin when
    v <= -margin). Returns (value, dvalue/dv). Zero below -margin, quadratic
    ramp of width delta, then linear with unit slope."""
    u = v + margin
    if u <= 0:
        return 0.0, 0.0
    if u < delta:
        return u * u / (2 * delta), u / delta
    return u - delta / 2, 1.0


class _Grad:
    """Accumulates d(energy)/d(center) per object id."""

    def __init__(self):
        self.g: Dict[str, list] = {}

    def add(self, oid: str, gx: float, gy: float):
        cur = self.g.setdefault(oid, [0.0, 0.0])
        cur[0] += gx
        cur[1] += gy

    def done(self) -> Dict[str, Tuple[float, float]]:
        return {k: (v[0], v[1]) for k, v in self.g.items()}


def energy(edge: RelationEdge, layout: Layout, cfg: RuleConfig = RuleConfig(),
           sharpness: float = DEFAULT_SHARPNESS,
           margin: float = DEFAULT_MARGIN):
    """Smooth penalty for one edge.

    Returns (value, grads) where grads maps object ids to d(value)/d(center).
    Zero value implies holds(edge) is true. Extents are treated as constants;
    only centers carry gradient.
    """
    if sharpness <= 0:
        raise ValueError("sharpness must be positive")
    a, b = _boxes(edge, layout)
    rel = edge.relation
    delta = 1.0 / sharpness
    grad = _Grad()
    sid = edge.subject
    oid = edge.object
    total = 0.0

    def corner_terms(terms):
        # terms: (violation, d violation / d cx_subject, d/d cy_subject,
        #         d/d cx_object, d/d cy_object) with None for absent box
        nonlocal total
        for v, dsx, dsy, dox, doy in terms:
            val, dv = _hinge(v, margin, delta)
            total += val
            if dv != 0.0:
                grad.add(sid, dv * dsx, dv * dsy)
                if b is not None and (dox or doy):
                    grad.add(oid, dv * dox, dv * doy)

    hw_a, hh_a = a.extent[0] / 2, a.extent[1] / 2
    if rel is RelationType.IN_SCENE:
        corner_terms([
            (hw_a - a.center[0], -1.0, 0.0, 0.0, 0.0),      # left >= 0
            (a.center[0] + hw_a - 1, 1.0, 0.0, 0.0, 0.0),   # right <= 1
            (hh_a - a.center[1], 0.0, -1.0, 0.0, 0.0),      # top >= 0
            (a.center[1] + hh_a - 1, 0.0, 1.0, 0.0, 0.0),   # bottom <= 1
        ])
    elif rel is RelationType.RIGHT_IN_SCENE:
        corner_terms([
            (a.center[0] + hw_a - 1, 1.0, 0.0, 0.0, 0.0),    # right edge <= 1
            (0.5 - (a.center[0] + hw_a), -1.0, 0.0, 0.0, 0.0),  # right edge >= 0.5
        ])
    elif rel is RelationType.LEFT_IN_SCENE:
        corner_terms([
            (hw_a - a.center[0], -1.0, 0.0, 0.0, 0.0),          # left edge >= 0
            ((a.center[0] - hw_a) - 0.5, 1.0, 0.0, 0.0, 0.0),   # left edge <= 0.5
        ])
    elif rel is RelationType.IN:
        hw_b, hh_b = b.extent[0] / 2, b.extent[1] / 2
        corner_terms([
            ((b.center[0] - hw_b) - (a.center[0] - hw_a), -1.0, 0.0, 1.0, 0.0),
            ((a.center[0] + hw_a) - (b.center[0] + hw_b), 1.0, 0.0, -1.0, 0.0),
            ((b.center[1] - hh_b) - (a.center[1] - hh_a), 0.0, -1.0, 0.0, 1.0),
            ((a.center[1] + hh_a) - (b.center[1] + hh_b), 0.0, 1.0, 0.0, -1.0),
        ])
    elif rel is RelationType.LEFT_OF:
        corner_terms([(a.center[0] - b.center[0], 1.0, 0.0, -1.0, 0.0)])
    elif rel in (RelationType.TOP_OF, RelationType.IN_FRONT_OF):
        corner_terms([(a.center[1] - b.center[1], 0.0, 1.0, 0.0, -1.0)])
    elif rel is RelationType.CLOSE_TO or rel is RelationType.AWAY_FROM:
        dist = _center_distance(a, b)
        if rel is RelationType.CLOSE_TO:
            v = dist - cfg.close_threshold
            sign = 1.0
        else:
            v = cfg.away_threshold - dist
            sign = -1.0
        val, dv = _hinge(v, margin, delta)
        total += val
        if dv != 0.0:
            safe = max(dist, 1e-12)
            ux = (a.center[0] - b.center[0]) / safe
            uy = (a.center[1] - b.center[1]) / safe
            grad.add(sid, dv * sign * ux, dv * sign * uy)
            grad.add(oid, -dv * sign * ux, -dv * sign * uy)
    elif rel is RelationType.OVERLAPPING:
        # Needs positive overlap on both axes; each axis penalizes the
        # shortfall of the overlap length. min/max pick one-sided branches.
        ox = min(a.right, b.right) - max(a.left, b.left)
        oy = min(a.bottom, b.bottom) - max(a.top, b.top)
        val, dv = _hinge(-ox, margin, delta)
        total += val
        if dv != 0.0:
            d_a = (-1.0 if a.right <= b.right else 0.0) + (1.0 if a.left >= b.left else 0.0)
            grad.add(sid, dv * d_a, 0.0)
            grad.add(oid, -dv * d_a, 0.0)
        val, dv = _hinge(-oy, margin, delta)
        total += val
        if dv != 0.0:
            d_a = (-1.0 if a.bottom <= b.bottom else 0.0) + (1.0 if a.top >= b.top else 0.0)
            grad.add(sid, 0.0, dv * d_a)
            grad.add(oid, 0.0, -dv * d_a)
    else:
        raise AssertionError(f"unhandled relation {rel}")
    return total, grad.done()


def graph_energy(g: SceneGraph, layout: Layout, cfg: RuleConfig = RuleConfig(),
                 sharpness: float = DEFAULT_SHARPNESS,
                 margin: float = DEFAULT_MARGIN):
    """Total energy over all edges, with summed gradients per object."""
    total = 0.0
    grads: Dict[str, list] = {oid: [0.0, 0.0] for oid in g.object_ids}
    for edge in sorted(g.edges, key=lambda e: e.key()):
        val, g_e = energy(edge, layout, cfg, sharpness, margin)
        total += val
        for oid, (gx, gy) in g_e.items():
            grads[oid][0] += gx
            grads[oid][1] += gy
    return total, {k: (v[0], v[1]) for k, v in grads.items()}


def position_score(g: SceneGraph, layout: Layout, cfg: RuleConfig = RuleConfig()) -> float:
    """Fraction of edges whose rule holds; an edgeless graph scores 1.0."""
    if not layout.covers(g):
        missing = [oid for oid in g.object_ids if oid not in layout]
        raise ValueError(f"layout does not cover graph; missing {missing}")
    if not g.edges:
        return 1.0
    satisfied = sum(1 for e in g.edges if holds(e, layout, cfg))
    return satisfied / len(g.edges)


def per_edge_verdicts(g: SceneGraph, layout: Layout, cfg: RuleConfig = RuleConfig()):
    """(edge, bool) pairs in canonical edge order."""
    return [(e, holds(e, layout, cfg)) for e in sorted(g.edges, key=lambda e: e.key())]
