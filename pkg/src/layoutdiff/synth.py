"""Synthetic training data: (scene graph, sizes, ground-truth layout) triples.

Graphs are sampled conflict-free by construction; layouts are rejection
sampled uniformly over the unit canvas until every relation rule holds, so
ground-truth positions are distributed uniformly over the feasible set.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import yaml

from .errors import UnsatisfiableGraphError
from .graphio import detect_conflicts, graph_from_mapping, graph_to_mapping
from .rules import RuleConfig, energy, holds, position_score
from .scene import (SCENE, BoundingBox, Canvas, Layout, ObjectSpec,
                    RelationEdge, RelationType, SceneGraph, auto_ppi,
                    derive_extent)


def load_archetypes() -> Dict[str, Tuple[float, float, float]]:
    text = resources.files("layoutdiff.data").joinpath("archetypes.yaml").read_text()
    return {name: tuple(float(v) for v in size)
            for name, size in yaml.safe_load(text).items()}


DEFAULT_GENERATOR_ARCHETYPES = ("bed", "lamp", "sofa", "table", "chair",
                                "rug", "nightstand", "bookshelf")
DEFAULT_RELATION_WEIGHTS = {
    "left-of": 1.0, "top-of": 1.0, "close-to": 1.0, "away-from": 1.0,
}


def _default_size_ranges() -> Dict[str, Dict[str, Tuple[float, float]]]:
    table = load_archetypes()
    ranges = {}
    for name in DEFAULT_GENERATOR_ARCHETYPES:
        w, l, h = table[name]
        ranges[name] = {"w": (0.75 * w, 1.25 * w), "l": (0.75 * l, 1.25 * l),
                        "h": (0.75 * h, 1.25 * h)}
    return ranges


@dataclass(frozen=True)
class GeneratorConfig:
    object_count: Tuple[int, int] = (2, 4)
    binary_edges: Tuple[int, int] = (1, 3)
    size_ranges: Dict[str, Dict[str, Tuple[float, float]]] = field(
        default_factory=_default_size_ranges)
    relation_weights: Dict[str, float] = field(
        default_factory=lambda: dict(DEFAULT_RELATION_WEIGHTS))
    max_attempts: int = 10000
    retry_budget: int = 20
    canvas: Canvas = Canvas(1024, 1024)
    rule_config: RuleConfig = RuleConfig()
    # Require rules to hold with this margin (normalized units) when > 0;
    # keeps ground-truth layouts off predicate boundaries.
    margin: float = 0.0

    def __post_init__(self):
        if not (1 <= self.object_count[0] <= self.object_count[1]):
            raise ValueError(f"bad object_count range {self.object_count}")
        if not (0 <= self.binary_edges[0] <= self.binary_edges[1]):
            raise ValueError(f"bad binary_edges range {self.binary_edges}")
        if self.max_attempts <= 0 or self.retry_budget <= 0:
            raise ValueError("max_attempts and retry_budget must be positive")
        if self.margin < 0:
            raise ValueError("margin must be nonnegative")
        if not self.size_ranges:
            raise ValueError("size_ranges must not be empty")
        if not self.relation_weights:
            raise ValueError("relation_weights must not be empty")
        for name in self.relation_weights:
            rel = RelationType(name)
            if rel.is_unary:
                raise ValueError(f"relation weights apply to binary relations, got {name}")

    @staticmethod
    def from_mapping(m: dict) -> "GeneratorConfig":
        kwargs = {}
        if "object_count" in m:
            kwargs["object_count"] = tuple(m["object_count"])
        if "binary_edges" in m:
            kwargs["binary_edges"] = tuple(m["binary_edges"])
        if "size_ranges" in m:
            kwargs["size_ranges"] = {
                name: {axis: tuple(rng) for axis, rng in spec.items()}
                for name, spec in m["size_ranges"].items()}
        if "relation_weights" in m:
            kwargs["relation_weights"] = {k: float(v) for k, v in m["relation_weights"].items()}
        if "max_attempts" in m:
            kwargs["max_attempts"] = int(m["max_attempts"])
        if "retry_budget" in m:
            kwargs["retry_budget"] = int(m["retry_budget"])
        if "canvas" in m:
            kwargs["canvas"] = Canvas(int(m["canvas"]["width"]), int(m["canvas"]["height"]))
        if "margin" in m:
            kwargs["margin"] = float(m["margin"])
        if "rule" in m:
            kwargs["rule_config"] = RuleConfig(
                close_threshold=float(m["rule"].get("close_threshold", 0.25)),
                away_threshold=float(m["rule"].get("away_threshold", 0.50)))
        return GeneratorConfig(**kwargs)


@dataclass(frozen=True)
class DatasetRecord:
    graph: SceneGraph
    layout: Layout
    seed: int
    ppi: float


# Relations that pair with another relation into a contradiction, used to
# keep sampled graphs conflict-free by construction.
_PROXIMITY = {RelationType.CLOSE_TO, RelationType.AWAY_FROM}


def sample_graph(cfg: GeneratorConfig, seed) -> SceneGraph:
    """Conflict-free random graph; every object gets an in-scene edge."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(cfg.object_count[0], cfg.object_count[1] + 1))
    names = sorted(cfg.size_ranges)
    objects = []
    for i in range(n):
        arch = names[int(rng.integers(len(names)))]
        r = cfg.size_ranges[arch]
        size = (rng.uniform(*r["w"]), rng.uniform(*r["l"]), rng.uniform(*r["h"]))
        objects.append(ObjectSpec(id=f"{arch}{i}", size=size, attributes=(arch,)))

    edges = [RelationEdge(relation=RelationType.IN_SCENE, subject=o.id, object=SCENE)
             for o in objects]
    rel_names = sorted(cfg.relation_weights)
    weights = np.array([cfg.relation_weights[r] for r in rel_names], dtype=float)
    weights = weights / weights.sum()
    target = int(rng.integers(cfg.binary_edges[0], cfg.binary_edges[1] + 1))
    max_pairs = n * (n - 1) // 2
    target = min(target, max_pairs)
    pair_rel: Dict[frozenset, set] = {}
    added = 0
    attempts = 0
    while added < target and attempts < 200:
        attempts += 1
        rel = RelationType(rel_names[int(rng.choice(len(rel_names), p=weights))])
        i, j = rng.choice(n, size=2, replace=False)
        s, o = objects[i].id, objects[j].id
        pair = frozenset((s, o))
        used = pair_rel.get(pair, set())
        if rel in used:  # same relation on this pair (either direction)
            continue
        if rel in _PROXIMITY and used & _PROXIMITY:
            continue
        edges.append(RelationEdge(relation=rel, subject=s, object=o))
        pair_rel.setdefault(pair, set()).add(rel)
        added += 1

    g = SceneGraph(objects=tuple(objects), edges=tuple(edges), canvas=cfg.canvas,
                   scene_label="synthetic")
    assert not detect_conflicts(g), "generator produced a conflicting graph"
    return g


def layout_extents(g: SceneGraph, ppi: Optional[float] = None):
    if ppi is None:
        ppi = auto_ppi(g.objects, g.canvas)
    return ppi, {o.id: derive_extent(o, g.canvas, ppi) for o in g.objects}


def sample_layout(g: SceneGraph, cfg: GeneratorConfig, seed,
                  ppi: Optional[float] = None) -> Layout:
    """Uniform rejection sampling of centers until every rule holds.

    With cfg.margin > 0, acceptance requires the rules to hold with that
    margin (the smooth energy's zero set), which keeps ground truth away
    from predicate boundaries.
    """
    rng = np.random.default_rng(seed)
    ppi, extents = layout_extents(g, ppi)
    ids = g.object_ids

    if cfg.margin > 0:
        def edge_ok(e, layout):
            val, _ = energy(e, layout, cfg.rule_config, margin=cfg.margin)
            return val == 0.0
    else:
        def edge_ok(e, layout):
            return holds(e, layout, cfg.rule_config)

    fail_counts = {e: 0 for e in g.edges}
    for _ in range(cfg.max_attempts):
        centers = rng.uniform(0.0, 1.0, size=(len(ids), 2))
        layout = Layout(boxes={oid: BoundingBox(center=tuple(c), extent=extents[oid])
                               for oid, c in zip(ids, centers)}, canvas=g.canvas)
        ok = True
        for e in g.edges:
            if not edge_ok(e, layout):
                fail_counts[e] += 1
                ok = False
        if ok:
            return layout
    worst = max(fail_counts.values()) if fail_counts else 0
    offenders = [e for e, c in fail_counts.items() if c >= 0.5 * worst and c > 0]
    raise UnsatisfiableGraphError(
        f"no satisfying layout in {cfg.max_attempts} attempts; "
        f"most-violated edges: {', '.join(str(e) for e in offenders)}",
        edges=offenders)


def record_seed(dataset_seed: int, index: int) -> int:
    return int(np.random.SeedSequence((dataset_seed, index)).generate_state(1)[0])


def generate_record(cfg: GeneratorConfig, seed: int) -> DatasetRecord:
    """One record from one integer seed; retries fresh graphs on
    unsatisfiable constraint sets up to the retry budget."""
    last_error = None
    for retry in range(cfg.retry_budget):
        g = sample_graph(cfg, np.random.SeedSequence((seed, retry, 0)))
        try:
            ppi, _ = layout_extents(g)
            layout = sample_layout(g, cfg, np.random.SeedSequence((seed, retry, 1)),
                                   ppi=ppi)
        except UnsatisfiableGraphError as exc:
            last_error = exc
            continue
        return DatasetRecord(graph=g, layout=layout, seed=seed, ppi=ppi)
    raise UnsatisfiableGraphError(
        f"retry budget ({cfg.retry_budget}) exhausted for seed {seed}: {last_error}",
        edges=getattr(last_error, "edges", ()))


def generate_dataset(cfg: GeneratorConfig, n: int, seed: int) -> List[DatasetRecord]:
    """n records, deterministic given seed; every record satisfies all rules."""
    if n <= 0:
        raise ValueError(f"n must be positive, got {n}")
    records = []
    for i in range(n):
        rec = generate_record(cfg, record_seed(seed, i))
        assert position_score(rec.graph, rec.layout, cfg.rule_config) == 1.0
        records.append(rec)
    return records


# ---------------------------------------------------------------------------
# Dataset file I/O: one JSON record per line

def layout_to_mapping(layout: Layout, ppi: Optional[float] = None) -> dict:
    m = {
        "canvas": {"width": layout.canvas.width, "height": layout.canvas.height},
        "boxes": {oid: {"center": list(b.center), "extent": list(b.extent)}
                  for oid, b in sorted(layout.boxes.items())},
    }
    if ppi is not None:
        m["ppi"] = ppi
    return m


def layout_from_mapping(m: dict) -> Layout:
    canvas = Canvas(int(m["canvas"]["width"]), int(m["canvas"]["height"]))
    boxes = {oid: BoundingBox(center=tuple(b["center"]), extent=tuple(b["extent"]))
             for oid, b in m["boxes"].items()}
    return Layout(boxes=boxes, canvas=canvas)


def record_to_line(rec: DatasetRecord) -> str:
    doc = {"seed": rec.seed, "ppi": rec.ppi,
           "graph": graph_to_mapping(rec.graph),
           "layout": layout_to_mapping(rec.layout)}
    return json.dumps(doc, separators=(",", ":"), sort_keys=True)


def record_from_line(line: str) -> DatasetRecord:
    doc = json.loads(line)
    return DatasetRecord(graph=graph_from_mapping(doc["graph"]),
                         layout=layout_from_mapping(doc["layout"]),
                         seed=int(doc["seed"]), ppi=float(doc["ppi"]))


def save_dataset(records: Sequence[DatasetRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(record_to_line(rec))
            fh.write("\n")


def load_dataset(path) -> List[DatasetRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(record_from_line(line))
    return records
