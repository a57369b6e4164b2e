"""Batch evaluation: suite scoring, baseline placers, method comparison.

A suite is a list of scene graphs. Each graph is sampled several times, each
sample scored against the relation rules, and the aggregates assembled into
a report with the columns rel_cov, deg, conf, pos_score, size_iou,
success_rate. Per-graph failures (e.g. a relation missing from the
checkpoint) degrade the success rate instead of aborting the suite.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import LayoutDiffError
from .graphio import detect_conflicts, mean_degree, relationship_coverage
from .model import ModelParams, NoiseSchedule
from .rules import RuleConfig, graph_energy, position_score
from .sampler import SamplerConfig, sample_analytic, sample_batch
from .scene import BoundingBox, Layout, SceneGraph, auto_ppi, derive_extent


def size_iou(predicted: Sequence[float], truth: Sequence[float],
             per_axis_mean: bool = False) -> float:
    """Similarity of two (w, l, h) size triples in [0, 1].

    Default is volumetric: product over axes of min/max ratios. The
    per-axis-mean alternative averages the three ratios instead.
    """
    if len(predicted) != 3 or len(truth) != 3:
        raise ValueError("size triples must have 3 entries")
    ratios = []
    for p, t in zip(predicted, truth):
        if p <= 0 or t <= 0:
            raise ValueError(f"sizes must be positive, got {predicted} vs {truth}")
        ratios.append(min(p, t) / max(p, t))
    if per_axis_mean:
        return float(np.mean(ratios))
    out = 1.0
    for r in ratios:
        out *= r
    return out


@dataclass(frozen=True)
class SuiteReport:
    method: str
    rel_cov: float
    deg: float
    conf: float
    pos_score: float
    size_iou: Optional[float]
    success_rate: float
    graphs: int
    samples: int
    failures: int
    seconds: float

    COLUMNS = ("rel_cov", "deg", "conf", "pos_score", "size_iou", "success_rate")

    def row(self) -> Dict[str, object]:
        return {
            "method": self.method,
            "rel_cov": round(self.rel_cov, 4),
            "deg": round(self.deg, 4),
            "conf": round(self.conf, 4),
            "pos_score": round(self.pos_score, 4),
            "size_iou": None if self.size_iou is None else round(self.size_iou, 4),
            "success_rate": round(self.success_rate, 4),
            "graphs": self.graphs,
            "samples": self.samples,
            "seconds": round(self.seconds, 3),
        }


Placer = Callable[[SceneGraph, int], List[Layout]]


def _fixed_extent_layout(g: SceneGraph, centers: np.ndarray) -> Layout:
    ppi = auto_ppi(g.objects, g.canvas)
    boxes = {}
    for i, o in enumerate(g.objects):
        boxes[o.id] = BoundingBox(center=(float(centers[i, 0]), float(centers[i, 1])),
                                  extent=derive_extent(o, g.canvas, ppi))
    return Layout(boxes=boxes, canvas=g.canvas)


def random_placer(g: SceneGraph, seed: int, n: int) -> List[Layout]:
    """Uniform centers over the unit canvas, extents from object sizes."""
    rng = np.random.default_rng(seed)
    return [_fixed_extent_layout(g, rng.uniform(0, 1, size=(len(g.objects), 2)))
            for _ in range(n)]


def greedy_energy_descent(g: SceneGraph, seed: int, n: int,
                          rule_cfg: RuleConfig = RuleConfig(),
                          iterations: int = 300, step: float = 0.01,
                          sharpness: float = 50.0) -> List[Layout]:
    """Plain gradient descent on the summed soft energies."""
    rng = np.random.default_rng(seed)
    ids = tuple(o.id for o in g.objects)
    out = []
    for _ in range(n):
        centers = rng.uniform(0.1, 0.9, size=(len(ids), 2))
        for _it in range(iterations):
            layout = _fixed_extent_layout(g, centers)
            total, grads = graph_energy(g, layout, rule_cfg, sharpness)
            if total == 0.0:
                break
            grad = np.array([grads[oid] for oid in ids])
            centers = np.clip(centers - step * grad, 0.0, 1.0)
        out.append(_fixed_extent_layout(g, centers))
    return out


def evaluate_suite(suite: Sequence[SceneGraph], params: Optional[ModelParams],
                   sched: Optional[NoiseSchedule],
                   sampler_cfg: SamplerConfig = SamplerConfig(),
                   rule_cfg: RuleConfig = RuleConfig(),
                   samples_per_graph: int = 3,
                   method: str = "compositional-diffusion",
                   placer: Optional[Placer] = None,
                   size_truth: Optional[Dict[str, Tuple[float, float, float]]] = None,
                   ) -> SuiteReport:
    """Sample and score every graph in the suite.

    With a placer given, layouts come from it instead of the diffusion
    sampler (params/sched may then be None). size_truth maps object ids to
    reference size triples for the size-IoU column.
    """
    if not suite:
        raise ValueError("suite must not be empty")
    t0 = time.perf_counter()
    scores: List[float] = []
    failures = 0
    iou_values: List[float] = []
    for gi, g in enumerate(suite):
        seed = sampler_cfg.seed + 10_000 * gi
        try:
            if placer is not None:
                layouts = placer(g, seed, samples_per_graph)
            else:
                layouts, _ = sample_batch(g, params, sched,
                                          replace(sampler_cfg, seed=seed),
                                          samples_per_graph, rule_cfg)
        except (LayoutDiffError, ValueError):
            failures += samples_per_graph
            continue
        for lay in layouts:
            scores.append(position_score(g, lay, rule_cfg))
        if size_truth:
            for o in g.objects:
                if o.id in size_truth:
                    iou_values.append(size_iou(o.size, size_truth[o.id]))
    total = len(suite) * samples_per_graph
    return SuiteReport(
        method=method,
        rel_cov=float(np.mean([relationship_coverage(g) for g in suite])),
        deg=float(np.mean([mean_degree(g) for g in suite])),
        conf=float(np.mean([1.0 if detect_conflicts(g) else 0.0 for g in suite])),
        pos_score=float(np.mean(scores)) if scores else 0.0,
        size_iou=float(np.mean(iou_values)) if iou_values else None,
        success_rate=(total - failures) / total,
        graphs=len(suite),
        samples=total - failures,
        failures=failures,
        seconds=time.perf_counter() - t0,
    )


METHODS = ("random-placer", "greedy-energy-descent", "compositional-diffusion")


def compare_methods(suite: Sequence[SceneGraph],
                    params: Optional[ModelParams] = None,
                    sched: Optional[NoiseSchedule] = None,
                    sampler_cfg: SamplerConfig = SamplerConfig(),
                    rule_cfg: RuleConfig = RuleConfig(),
                    samples_per_graph: int = 3,
                    methods: Sequence[str] = METHODS) -> List[SuiteReport]:
    """One report row per method; the diffusion row requires a checkpoint
    and is marked absent otherwise."""
    rows = []
    for method in methods:
        if method == "random-placer":
            rows.append(evaluate_suite(
                suite, None, None, sampler_cfg, rule_cfg, samples_per_graph,
                method=method,
                placer=lambda g, seed, n: random_placer(g, seed, n)))
        elif method == "greedy-energy-descent":
            rows.append(evaluate_suite(
                suite, None, None, sampler_cfg, rule_cfg, samples_per_graph,
                method=method,
                placer=lambda g, seed, n: greedy_energy_descent(g, seed, n, rule_cfg)))
        elif method == "compositional-diffusion":
            if params is None or sched is None:
                rows.append(SuiteReport(method=method + " (absent: no checkpoint)",
                                        rel_cov=float("nan"), deg=float("nan"),
                                        conf=float("nan"), pos_score=float("nan"),
                                        size_iou=None, success_rate=0.0,
                                        graphs=len(suite), samples=0, failures=0,
                                        seconds=0.0))
            else:
                rows.append(evaluate_suite(suite, params, sched, sampler_cfg,
                                           rule_cfg, samples_per_graph,
                                           method=method))
        else:
            raise ValueError(f"unknown method '{method}'")
    return rows


def format_report(rows: Sequence[SuiteReport]) -> str:
    """Aligned text table over the fixed column set."""
    headers = ("method",) + SuiteReport.COLUMNS + ("samples", "seconds")
    table = [headers]
    for r in rows:
        d = r.row()
        table.append(tuple(
            "-" if d.get(h) is None else
            (f"{d[h]:.4f}" if isinstance(d[h], float) else str(d[h]))
            for h in headers))
    widths = [max(len(row[i]) for row in table) for i in range(len(headers))]
    lines = []
    for ri, row in enumerate(table):
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
        if ri == 0:
            lines.append("  ".join("-" * widths[i] for i in range(len(headers))))
    return "\n".join(lines) + "\n"


def report_to_json(rows: Sequence[SuiteReport]) -> str:
    return json.dumps([r.row() for r in rows], indent=2, sort_keys=True) + "\n"
