"""Annealed unadjusted Langevin sampling of layouts from the composed model.

Chains descend the noise schedule from t = T-1 to 0 with K inner steps per
level. The learned noise prediction converts to a score via
s = -eps_hat / sqrt(1 - abar_t); the per-level step size anneals as
eta_t = eps0 * (1 - abar_t) / (1 - abar_0), i.e. the base step size eps0 is
the step at the lowest noise level and steps grow with the noise scale.

A diagnostic mode replaces the learned score with the analytic soft-energy
gradient, isolating sampler behavior from model quality.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import List, Optional, Tuple

import numpy as np

from . import backend as backend_mod
from .errors import MissingDenoiserError
from .model import (GraphEncoding, ModelParams, NoiseSchedule, encode_graph,
                    sinusoidal_embedding)
from .rules import RuleConfig, graph_energy, position_score
from .scene import (BoundingBox, Layout, SceneGraph, auto_ppi, derive_extent)

INIT_MEAN = 0.5
INIT_STD = 0.25


@dataclass(frozen=True)
class SamplerConfig:
    steps_per_level: int = 2          # K
    base_step: float = 2e-4           # eps0, normalized units^2
    noise_scale: float = 1.0          # 0 => deterministic descent
    clip_to_canvas: bool = True
    seed: int = 0
    backend: Optional[str] = None     # None = auto, else 'compiled' / 'numpy'

    def __post_init__(self):
        if self.steps_per_level < 1:
            raise ValueError("steps_per_level must be >= 1")
        if self.base_step <= 0:
            raise ValueError("base_step must be positive")


def step_sizes(sched: NoiseSchedule, cfg: SamplerConfig) -> np.ndarray:
    one_minus = 1.0 - sched.alpha_bar
    return cfg.base_step * one_minus / one_minus[0]


@dataclass
class _PackedModel:
    """Flat parameter block + index tables consumed by the chain kernels."""

    pos_w: np.ndarray
    pos_b: np.ndarray
    dec_w: np.ndarray
    dec_b: np.ndarray
    flat: np.ndarray
    grp_off: np.ndarray
    grp_outw: np.ndarray
    grp_start: np.ndarray
    e_subj: np.ndarray
    e_obj: np.ndarray
    counts: np.ndarray
    mean_agg: int
    size_lat: np.ndarray
    scene_lat: np.ndarray
    time_lat: np.ndarray


def _pack(g: SceneGraph, enc: GraphEncoding, params: ModelParams,
          sched: NoiseSchedule) -> _PackedModel:
    from .model import SCENE_POS_INPUT, SCENE_SIZE_INPUT, _layer_names

    for rel in sorted(g.relation_types(), key=lambda r: r.value):
        if not params.has_relation(rel):
            raise MissingDenoiserError(rel.value)
    if (enc.counts == 0).any():
        lonely = [enc.object_ids[i] for i in np.flatnonzero(enc.counts == 0)]
        raise ValueError(f"objects appear in no edge: {lonely}")

    P = params.arrays
    D = params.latent_dim
    chunks: List[np.ndarray] = []
    offsets = []
    outws = []
    pos = 0
    for rel, _s, _e in enc.groups:
        offs = []
        for name in _layer_names(rel):
            a = np.ascontiguousarray(P[name], dtype=np.float64).ravel()
            offs.append(pos)
            chunks.append(a)
            pos += a.size
        offsets.append(offs)
        outws.append(D if rel.is_unary else 2 * D)
    grp_start = np.array([0] + [e for _r, _s, e in enc.groups], dtype=np.int64)

    size_lat = np.tanh(enc.sizes_norm @ P["size_enc.w"] + P["size_enc.b"])
    scene_lat = (np.tanh(SCENE_SIZE_INPUT @ P["size_enc.w"] + P["size_enc.b"])
                 + np.tanh(SCENE_POS_INPUT @ P["pos_enc.w"] + P["pos_enc.b"]))
    basis = sinusoidal_embedding(np.arange(sched.T), D)
    time_lat = basis @ P["time_proj.w"] + P["time_proj.b"]

    return _PackedModel(
        pos_w=np.ascontiguousarray(P["pos_enc.w"]),
        pos_b=np.ascontiguousarray(P["pos_enc.b"]),
        dec_w=np.ascontiguousarray(P["decoder.w"]),
        dec_b=np.ascontiguousarray(P["decoder.b"]),
        flat=np.concatenate(chunks) if chunks else np.zeros(0),
        grp_off=np.array(offsets, dtype=np.int64).reshape(len(offsets), 6),
        grp_outw=np.array(outws, dtype=np.int64),
        grp_start=grp_start,
        e_subj=enc.edge_subj.astype(np.int64),
        e_obj=enc.edge_obj.astype(np.int64),
        counts=enc.counts.astype(np.float64),
        mean_agg=1 if params.aggregation == "mean" else 0,
        size_lat=np.ascontiguousarray(size_lat),
        scene_lat=np.ascontiguousarray(scene_lat),
        time_lat=np.ascontiguousarray(time_lat),
    )


def _init_and_noise(rng: np.random.Generator, n: int, steps: int):
    x0 = INIT_MEAN + INIT_STD * rng.standard_normal((n, 2))
    np.clip(x0, 0.0, 1.0, out=x0)
    noise = rng.standard_normal((steps, n, 2))
    return x0, noise


def _layout_from_centers(g: SceneGraph, centers: np.ndarray,
                         enc: GraphEncoding) -> Layout:
    boxes = {}
    for i, oid in enumerate(enc.object_ids):
        spec = g.spec_of(oid)
        extent = derive_extent(spec, g.canvas, enc.ppi)
        boxes[oid] = BoundingBox(center=(float(centers[i, 0]), float(centers[i, 1])),
                                 extent=extent)
    return Layout(boxes=boxes, canvas=g.canvas)


def sample(g: SceneGraph, params: ModelParams, sched: NoiseSchedule,
           cfg: SamplerConfig = SamplerConfig()) -> Layout:
    """One layout from one seeded chain; bit-reproducible per backend."""
    enc = encode_graph(g)
    packed = _pack(g, enc, params, sched)
    kern = backend_mod.select_backend(cfg.backend)
    n = enc.n_objects
    steps = sched.T * cfg.steps_per_level
    rng = np.random.default_rng(cfg.seed)
    x0, noise = _init_and_noise(rng, n, steps)
    x = x0[None, :, :].copy()
    eta = step_sizes(sched, cfg)
    inv_sqrt_om = 1.0 / np.sqrt(1.0 - sched.alpha_bar)
    kern.run_chains(x, noise[None], packed.pos_w, packed.pos_b, packed.dec_w,
                    packed.dec_b, packed.flat, packed.grp_off, packed.grp_outw,
                    packed.grp_start, packed.e_subj, packed.e_obj, packed.counts,
                    packed.mean_agg, packed.size_lat, packed.scene_lat,
                    packed.time_lat, eta, inv_sqrt_om, cfg.steps_per_level,
                    cfg.noise_scale, 1 if cfg.clip_to_canvas else 0)
    return _layout_from_centers(g, x[0], enc)


def derived_seed(base_seed: int, index: int) -> int:
    """Counter-derived per-chain seed for batch sampling."""
    return int(base_seed) + index


@dataclass(frozen=True)
class BatchSummary:
    mean_score: float
    min_score: float
    max_score: float
    scores: Tuple[float, ...]


def sample_batch(g: SceneGraph, params: ModelParams, sched: NoiseSchedule,
                 cfg: SamplerConfig, n: int,
                 rule_cfg: RuleConfig = RuleConfig()):
    """n independent chains with counter-derived seeds, run together.

    Returns (layouts, BatchSummary). n=1 is exactly sample() with the
    derived seed; larger batches share GEMM calls across chains, which can
    reassociate float sums relative to one-at-a-time sampling (results still
    deterministic for a given n and seed).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n == 1:
        layouts = [sample(g, params, sched, replace(cfg, seed=derived_seed(cfg.seed, 0)))]
    else:
        enc = encode_graph(g)
        packed = _pack(g, enc, params, sched)
        kern = backend_mod.select_backend(cfg.backend)
        n_obj = enc.n_objects
        steps = sched.T * cfg.steps_per_level
        x = np.empty((n, n_obj, 2))
        noise = np.empty((n, steps, n_obj, 2))
        for c in range(n):
            rng = np.random.default_rng(derived_seed(cfg.seed, c))
            x[c], noise[c] = _init_and_noise(rng, n_obj, steps)
        eta = step_sizes(sched, cfg)
        inv_sqrt_om = 1.0 / np.sqrt(1.0 - sched.alpha_bar)
        kern.run_chains(x, noise, packed.pos_w, packed.pos_b, packed.dec_w,
                        packed.dec_b, packed.flat, packed.grp_off,
                        packed.grp_outw, packed.grp_start, packed.e_subj,
                        packed.e_obj, packed.counts, packed.mean_agg,
                        packed.size_lat, packed.scene_lat, packed.time_lat,
                        eta, inv_sqrt_om, cfg.steps_per_level, cfg.noise_scale,
                        1 if cfg.clip_to_canvas else 0)
        layouts = [_layout_from_centers(g, x[c], enc) for c in range(n)]
    scores = tuple(position_score(g, lay, rule_cfg) for lay in layouts)
    summary = BatchSummary(mean_score=float(np.mean(scores)),
                           min_score=float(np.min(scores)),
                           max_score=float(np.max(scores)), scores=scores)
    return layouts, summary


def sample_analytic(g: SceneGraph, sched: NoiseSchedule,
                    cfg: SamplerConfig = SamplerConfig(),
                    rule_cfg: RuleConfig = RuleConfig(),
                    sharpness: float = 50.0,
                    energy_trace: Optional[list] = None) -> Layout:
    """Diagnostic sampler: the analytic soft-energy gradient stands in for
    the learned score. No trained parameters required."""
    enc = encode_graph(g)
    n = enc.n_objects
    steps = sched.T * cfg.steps_per_level
    rng = np.random.default_rng(cfg.seed)
    x, noise = _init_and_noise(rng, n, steps)
    eta = step_sizes(sched, cfg)
    ids = enc.object_ids
    for t in range(sched.T - 1, -1, -1):
        for k in range(cfg.steps_per_level):
            s = (sched.T - 1 - t) * cfg.steps_per_level + k
            layout = _layout_from_centers(g, x, enc)
            total, grads = graph_energy(g, layout, rule_cfg, sharpness)
            if energy_trace is not None:
                energy_trace.append(total)
            score = -np.array([grads[oid] for oid in ids])
            x = x + 0.5 * eta[t] * score + np.sqrt(eta[t]) * cfg.noise_scale * noise[s]
            if cfg.clip_to_canvas:
                np.clip(x, 0.0, 1.0, out=x)
    return _layout_from_centers(g, x, enc)
