"""Compositional diffusion model over layout centers.

One small feed-forward denoiser per relation type predicts, at diffusion
time t, the noise applied to the centers of the objects participating in an
edge. Per object, the 256-d outputs of every edge it appears in are averaged
and decoded to a 2-d noise estimate. Size/position encoders, the time
projection, all denoisers and the decoder train jointly on an L2 loss
between true and predicted noise.

Arithmetic is float64 with fixed summation order (bit-reproducible given a
seed); checkpoints store parameters as little-endian float32 per the
on-disk format.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import CheckpointFormatError
from .scene import (RELATION_INDEX, Canvas, Layout, RelationType, SceneGraph,
                    auto_ppi)

LATENT_DIM = 256
SCENE_SIZE_INPUT = np.array([1.0, 1.0, 1.0])
SCENE_POS_INPUT = np.array([0.5, 0.5])

RELATION_BY_INDEX = {i: rel for rel, i in RELATION_INDEX.items()}


# ---------------------------------------------------------------------------
# Noise schedule

@dataclass(frozen=True)
class NoiseSchedule:
    T: int
    beta: np.ndarray
    alpha_bar: np.ndarray

    def __post_init__(self):
        if len(self.beta) != self.T or len(self.alpha_bar) != self.T:
            raise ValueError("schedule arrays must have length T")


def make_schedule(T: int = 1000, beta_start: float = 1e-4,
                  beta_end: float = 0.02) -> NoiseSchedule:
    """Linear beta schedule; alpha_bar is the running product of (1 - beta)."""
    if T < 1:
        raise ValueError("T must be >= 1")
    if not (0 < beta_start < beta_end < 1):
        raise ValueError(f"need 0 < beta_start < beta_end < 1, got {beta_start}, {beta_end}")
    beta = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    alpha_bar = np.cumprod(1.0 - beta)
    return NoiseSchedule(T=T, beta=beta, alpha_bar=alpha_bar)


def forward_noise(p0: np.ndarray, t: int, eps: np.ndarray,
                  sched: NoiseSchedule) -> np.ndarray:
    """sqrt(abar_t) * p0 + sqrt(1 - abar_t) * eps, elementwise."""
    if not (0 <= t < sched.T):
        raise ValueError(f"t={t} outside [0, {sched.T})")
    a = sched.alpha_bar[t]
    return np.sqrt(a) * np.asarray(p0) + np.sqrt(1.0 - a) * np.asarray(eps)


def sinusoidal_embedding(t, dim: int = LATENT_DIM) -> np.ndarray:
    """Block sin/cos features of integer timesteps. t may be scalar or array."""
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half) / half)
    ang = np.atleast_1d(np.asarray(t, dtype=np.float64))[:, None] * freqs[None, :]
    emb = np.concatenate([np.sin(ang), np.cos(ang)], axis=1)
    return emb[0] if np.isscalar(t) else emb


# ---------------------------------------------------------------------------
# Parameters

def _layer_names(rel: RelationType) -> List[str]:
    base = f"denoiser.{rel.value}"
    return [f"{base}.w1", f"{base}.b1", f"{base}.w2", f"{base}.b2",
            f"{base}.w3", f"{base}.b3"]


def _shapes_for(relations: Sequence[RelationType], dim: int) -> Dict[str, tuple]:
    shapes = {
        "size_enc.w": (3, dim), "size_enc.b": (dim,),
        "pos_enc.w": (2, dim), "pos_enc.b": (dim,),
        "time_proj.w": (dim, dim), "time_proj.b": (dim,),
        "decoder.w": (dim, 2), "decoder.b": (2,),
    }
    for rel in relations:
        out_w = dim if rel.is_unary else 2 * dim
        names = _layer_names(rel)
        shapes[names[0]] = (3 * dim, dim)
        shapes[names[1]] = (dim,)
        shapes[names[2]] = (dim, dim)
        shapes[names[3]] = (dim,)
        shapes[names[4]] = (dim, out_w)
        shapes[names[5]] = (out_w,)
    return shapes


@dataclass
class ModelParams:
    """Named flat parameter store for the full denoiser stack."""

    arrays: Dict[str, np.ndarray]
    relations: Tuple[RelationType, ...]
    latent_dim: int = LATENT_DIM
    aggregation: str = "mean"  # or "sum": ablation switch for per-object pooling

    @staticmethod
    def init(relations: Sequence[RelationType], seed: int = 0,
             latent_dim: int = LATENT_DIM, aggregation: str = "mean") -> "ModelParams":
        if aggregation not in ("mean", "sum"):
            raise ValueError(f"unknown aggregation '{aggregation}'")
        relations = tuple(sorted(set(relations), key=lambda r: r.value))
        rng = np.random.default_rng(seed)
        shapes = _shapes_for(relations, latent_dim)
        arrays = {}
        for name in sorted(shapes):
            shape = shapes[name]
            if len(shape) == 1:  # biases start at zero
                arrays[name] = np.zeros(shape, dtype=np.float64)
            else:
                fan_in = shape[0]
                arrays[name] = rng.normal(0.0, 1.0 / math.sqrt(fan_in), size=shape)
        return ModelParams(arrays=arrays, relations=relations, latent_dim=latent_dim,
                           aggregation=aggregation)

    def param_count(self) -> int:
        return sum(a.size for a in self.arrays.values())

    def names(self) -> List[str]:
        return sorted(self.arrays)

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.arrays[n].ravel() for n in self.names()])

    def load_flat(self, flat: np.ndarray) -> None:
        pos = 0
        for n in self.names():
            a = self.arrays[n]
            self.arrays[n] = flat[pos:pos + a.size].reshape(a.shape).copy()
            pos += a.size
        if pos != flat.size:
            raise ValueError("flat vector size mismatch")

    def has_relation(self, rel: RelationType) -> bool:
        return rel in self.relations


# ---------------------------------------------------------------------------
# Graph encoding: index arrays consumed by the forward/backward engine

@dataclass(frozen=True)
class GraphEncoding:
    object_ids: Tuple[str, ...]
    sizes_norm: np.ndarray      # (n, 3)
    edge_rel: np.ndarray        # (E,) relation index, sorted groups
    edge_subj: np.ndarray       # (E,) object index
    edge_obj: np.ndarray        # (E,) object index or -1 for scene
    groups: Tuple[Tuple[RelationType, int, int], ...]  # (rel, start, end)
    subj_row: np.ndarray        # (E,) contribution row of the subject half
    obj_row: np.ndarray         # (E,) contribution row of the object half, -1 if unary
    seg_bounds: np.ndarray      # (n+1,) contribution segments per object
    counts: np.ndarray          # (n,) contributions per object
    ppi: float
    canvas: Canvas

    @property
    def n_objects(self) -> int:
        return len(self.object_ids)

    @property
    def n_contrib(self) -> int:
        return int(self.seg_bounds[-1])


def normalized_sizes(g: SceneGraph, ppi: float) -> np.ndarray:
    """Physical size triples scaled to canvas units (w, l by width; h by height)."""
    out = np.empty((len(g.objects), 3))
    for i, o in enumerate(g.objects):
        w, l, h = o.size
        out[i] = (w * ppi / g.canvas.width, l * ppi / g.canvas.width,
                  h * ppi / g.canvas.height)
    return out


def encode_graph(g: SceneGraph, ppi: Optional[float] = None) -> GraphEncoding:
    """Precompute the index structure of one graph for the engine.

    Edges are taken in canonical order and grouped by relation; per object,
    contribution rows follow canonical edge order, so reductions have a fixed
    summation order no matter how the caller assembled the graph.
    """
    if ppi is None:
        ppi = auto_ppi(g.objects, g.canvas)
    ids = g.object_ids
    index = {oid: i for i, oid in enumerate(ids)}
    edges = g.edges  # canonical already
    order = sorted(range(len(edges)), key=lambda k: (RELATION_INDEX[edges[k].relation],
                                                     edges[k].key()))
    edges = [edges[k] for k in order]
    e_rel = np.array([RELATION_INDEX[e.relation] for e in edges], dtype=np.int32)
    e_subj = np.array([index[e.subject] for e in edges], dtype=np.int32)
    e_obj = np.array([index[e.object] if not e.relation.is_unary else -1
                      for e in edges], dtype=np.int32)

    groups = []
    start = 0
    for k in range(1, len(edges) + 1):
        if k == len(edges) or e_rel[k] != e_rel[start]:
            groups.append((RELATION_BY_INDEX[int(e_rel[start])], start, k))
            start = k

    n = len(ids)
    subj_row = np.full(len(edges), -1, dtype=np.int32)
    obj_row = np.full(len(edges), -1, dtype=np.int32)
    seg_bounds = np.zeros(n + 1, dtype=np.int32)
    row = 0
    for i in range(n):
        for k in range(len(edges)):
            if e_subj[k] == i:
                subj_row[k] = row
                row += 1
            elif e_obj[k] == i:
                obj_row[k] = row
                row += 1
        seg_bounds[i + 1] = row
    counts = np.diff(seg_bounds).astype(np.int32)

    return GraphEncoding(object_ids=ids, sizes_norm=normalized_sizes(g, ppi),
                         edge_rel=e_rel, edge_subj=e_subj, edge_obj=e_obj,
                         groups=tuple(groups), subj_row=subj_row, obj_row=obj_row,
                         seg_bounds=seg_bounds, counts=counts, ppi=ppi,
                         canvas=g.canvas)


# ---------------------------------------------------------------------------
# Batched forward / backward

@dataclass
class _Batch:
    """A set of graphs packed into flat arrays with global indices."""

    sizes: np.ndarray           # (N, 3)
    rec_of_obj: np.ndarray      # (N,)
    obj_weight: np.ndarray      # (N,) per-record loss weights
    edge_subj: np.ndarray       # (E,) global object index
    edge_obj: np.ndarray        # (E,)  -1 for scene
    rec_of_edge: np.ndarray     # (E,)
    groups: List[Tuple[RelationType, np.ndarray]]  # (rel, edge indices)
    subj_row: np.ndarray
    obj_row: np.ndarray
    contrib_obj: np.ndarray     # (n_contrib,) owning object per row
    counts: np.ndarray          # (N,)
    n_records: int


def pack_batch(encodings: Sequence[GraphEncoding]) -> _Batch:
    sizes, rec_of_obj, edge_subj, edge_obj, rec_of_edge = [], [], [], [], []
    subj_row, obj_row, counts, contrib_obj = [], [], [], []
    group_edges: Dict[RelationType, List[int]] = {}
    obj_offset = edge_offset = row_offset = 0
    obj_weight = []
    for r, enc in enumerate(encodings):
        n = enc.n_objects
        sizes.append(enc.sizes_norm)
        rec_of_obj.append(np.full(n, r))
        obj_weight.append(np.full(n, 1.0 / (2.0 * n * len(encodings))))
        edge_subj.append(enc.edge_subj + obj_offset)
        edge_obj.append(np.where(enc.edge_obj >= 0, enc.edge_obj + obj_offset, -1))
        rec_of_edge.append(np.full(len(enc.edge_rel), r))
        subj_row.append(enc.subj_row + row_offset)
        obj_row.append(np.where(enc.obj_row >= 0, enc.obj_row + row_offset, -1))
        counts.append(enc.counts)
        for i in range(n):
            contrib_obj.append(np.full(enc.seg_bounds[i + 1] - enc.seg_bounds[i],
                                       i + obj_offset))
        for rel, s, e in enc.groups:
            group_edges.setdefault(rel, []).extend(range(s + edge_offset, e + edge_offset))
        obj_offset += n
        edge_offset += len(enc.edge_rel)
        row_offset += enc.n_contrib
    groups = [(rel, np.array(group_edges[rel], dtype=np.int64))
              for rel in sorted(group_edges, key=lambda r: r.value)]
    cat = np.concatenate
    return _Batch(sizes=cat(sizes), rec_of_obj=cat(rec_of_obj).astype(np.int64),
                  obj_weight=cat(obj_weight),
                  edge_subj=cat(edge_subj).astype(np.int64),
                  edge_obj=cat(edge_obj).astype(np.int64),
                  rec_of_edge=cat(rec_of_edge).astype(np.int64), groups=groups,
                  subj_row=cat(subj_row).astype(np.int64),
                  obj_row=cat(obj_row).astype(np.int64),
                  contrib_obj=cat(contrib_obj).astype(np.int64),
                  counts=cat(counts).astype(np.float64),
                  n_records=len(encodings))


def _forward(params: ModelParams, batch: _Batch, x: np.ndarray,
             t_rec: np.ndarray, keep_cache: bool):
    """Composed noise prediction for every object in the batch.

    x: (N, 2) noisy centers; t_rec: (B,) integer timesteps per record.
    Returns (eps_hat (N, 2), cache for the backward pass).
    """
    P = params.arrays
    D = params.latent_dim
    SL = np.tanh(batch.sizes @ P["size_enc.w"] + P["size_enc.b"])
    PL = np.tanh(x @ P["pos_enc.w"] + P["pos_enc.b"])
    L = SL + PL
    SLs = np.tanh(SCENE_SIZE_INPUT @ P["size_enc.w"] + P["size_enc.b"])
    PLs = np.tanh(SCENE_POS_INPUT @ P["pos_enc.w"] + P["pos_enc.b"])
    Lsc = SLs + PLs
    TB = sinusoidal_embedding(t_rec, D)
    TL = TB @ P["time_proj.w"] + P["time_proj.b"]

    E = len(batch.edge_subj)
    U = np.empty((E, 3 * D))
    U[:, :D] = L[batch.edge_subj]
    scene_mask = batch.edge_obj < 0
    U[:, D:2 * D] = np.where(scene_mask[:, None], Lsc, L[np.maximum(batch.edge_obj, 0)])
    U[:, 2 * D:] = TL[batch.rec_of_edge]

    n_rows = len(batch.contrib_obj)
    C = np.empty((n_rows, D))
    per_group = []
    for rel, idx in batch.groups:
        if not params.has_relation(rel):
            from .errors import MissingDenoiserError
            raise MissingDenoiserError(rel.value)
        w1, b1, w2, b2, w3, b3 = (P[n] for n in _layer_names(rel))
        Ug = U[idx]
        H1 = np.tanh(Ug @ w1 + b1)
        H2 = np.tanh(H1 @ w2 + b2)
        O = H2 @ w3 + b3
        C[batch.subj_row[idx]] = O[:, :D]
        orow = batch.obj_row[idx]
        has_obj = orow >= 0
        if has_obj.any():
            C[orow[has_obj]] = O[has_obj, D:]
        per_group.append((rel, idx, Ug if keep_cache else None, H1, H2))

    A = np.zeros((len(x), D))
    np.add.at(A, batch.contrib_obj, C)
    if params.aggregation == "mean":
        A = A / batch.counts[:, None]
    eps_hat = A @ P["decoder.w"] + P["decoder.b"]

    cache = None
    if keep_cache:
        cache = dict(SL=SL, PL=PL, SLs=SLs, PLs=PLs, TB=TB, x=x, A=A, C=C,
                     per_group=per_group, U=U, scene_mask=scene_mask)
    return eps_hat, cache


def _backward(params: ModelParams, batch: _Batch, cache: dict,
              d_eps: np.ndarray) -> Dict[str, np.ndarray]:
    """Reverse-mode gradients of a scalar through _forward.

    d_eps: (N, 2) upstream gradient on eps_hat. Returns grads keyed like
    params.arrays.
    """
    P = params.arrays
    D = params.latent_dim
    g = {name: np.zeros_like(a) for name, a in P.items()}

    A, C = cache["A"], cache["C"]
    g["decoder.w"] += A.T @ d_eps
    g["decoder.b"] += d_eps.sum(axis=0)
    dA = d_eps @ P["decoder.w"].T
    if params.aggregation == "mean":
        dA = dA / batch.counts[:, None]
    dC = dA[batch.contrib_obj]

    dU = np.zeros_like(cache["U"])
    for rel, idx, Ug, H1, H2 in cache["per_group"]:
        w1, b1, w2, b2, w3, b3 = (P[n] for n in _layer_names(rel))
        names = _layer_names(rel)
        out_w = w3.shape[1]
        dO = np.empty((len(idx), out_w))
        dO[:, :D] = dC[batch.subj_row[idx]]
        if out_w == 2 * D:
            orow = batch.obj_row[idx]
            has_obj = orow >= 0
            dO[:, D:] = 0.0
            if has_obj.any():
                dO[has_obj, D:] = dC[orow[has_obj]]
        g[names[4]] += H2.T @ dO
        g[names[5]] += dO.sum(axis=0)
        dH2 = dO @ w3.T
        dZ2 = dH2 * (1.0 - H2 * H2)
        g[names[2]] += H1.T @ dZ2
        g[names[3]] += dZ2.sum(axis=0)
        dH1 = dZ2 @ w2.T
        dZ1 = dH1 * (1.0 - H1 * H1)
        g[names[0]] += Ug.T @ dZ1
        g[names[1]] += dZ1.sum(axis=0)
        dU[idx] += dZ1 @ w1.T

    dL = np.zeros_like(cache["SL"])
    np.add.at(dL, batch.edge_subj, dU[:, :D])
    obj_part = dU[:, D:2 * D]
    scene_mask = cache["scene_mask"]
    real_obj = ~scene_mask
    if real_obj.any():
        np.add.at(dL, batch.edge_obj[real_obj], obj_part[real_obj])
    dLsc = obj_part[scene_mask].sum(axis=0) if scene_mask.any() else np.zeros(D)
    dTL = np.zeros((batch.n_records, D))
    np.add.at(dTL, batch.rec_of_edge, dU[:, 2 * D:])

    SL, PL = cache["SL"], cache["PL"]
    dZs = dL * (1.0 - SL * SL)
    g["size_enc.w"] += batch.sizes.T @ dZs
    g["size_enc.b"] += dZs.sum(axis=0)
    dZp = dL * (1.0 - PL * PL)
    g["pos_enc.w"] += cache["x"].T @ dZp
    g["pos_enc.b"] += dZp.sum(axis=0)

    SLs, PLs = cache["SLs"], cache["PLs"]
    dZs_sc = dLsc * (1.0 - SLs * SLs)
    g["size_enc.w"] += np.outer(SCENE_SIZE_INPUT, dZs_sc)
    g["size_enc.b"] += dZs_sc
    dZp_sc = dLsc * (1.0 - PLs * PLs)
    g["pos_enc.w"] += np.outer(SCENE_POS_INPUT, dZp_sc)
    g["pos_enc.b"] += dZp_sc

    g["time_proj.w"] += cache["TB"].T @ dTL
    g["time_proj.b"] += dTL.sum(axis=0)
    return g


def predict_eps_composed(g: SceneGraph, x: np.ndarray, t: int,
                         params: ModelParams, sched: NoiseSchedule,
                         enc: Optional[GraphEncoding] = None) -> np.ndarray:
    """Composed per-object noise estimate for one graph.

    x holds centers as an (n, 2) array in canonical object order (the order
    of g.objects). Every object must appear in at least one edge.
    """
    if not (0 <= t < sched.T):
        raise ValueError(f"t={t} outside [0, {sched.T})")
    if enc is None:
        enc = encode_graph(g)
    if (enc.counts == 0).any():
        lonely = [enc.object_ids[i] for i in np.flatnonzero(enc.counts == 0)]
        raise ValueError(f"objects appear in no edge: {lonely}")
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (enc.n_objects, 2):
        raise ValueError(f"x must have shape ({enc.n_objects}, 2), got {x.shape}")
    batch = pack_batch([enc])
    eps_hat, _ = _forward(params, batch, x, np.array([t]), keep_cache=False)
    return eps_hat


def centers_of(layout: Layout, object_ids: Sequence[str]) -> np.ndarray:
    return np.array([layout[oid].center for oid in object_ids], dtype=np.float64)


def loss_and_grads(params: ModelParams, encodings: Sequence[GraphEncoding],
                   p0: np.ndarray, t_rec: np.ndarray, eps: np.ndarray,
                   sched: NoiseSchedule):
    """Joint denoising loss and parameter gradients for a packed batch.

    p0/eps: (N, 2) stacked ground-truth centers and drawn noise; t_rec: (B,)
    timesteps. The loss is the mean over records of the per-record MSE over
    all center coordinates.
    """
    batch = pack_batch(encodings)
    a = sched.alpha_bar[t_rec][batch.rec_of_obj][:, None]
    x = np.sqrt(a) * p0 + np.sqrt(1.0 - a) * eps
    eps_hat, cache = _forward(params, batch, x, t_rec, keep_cache=True)
    diff = eps_hat - eps
    w = batch.obj_weight[:, None]
    loss = float((w * diff * diff).sum())
    d_eps = 2.0 * w * diff
    grads = _backward(params, batch, cache, d_eps)
    return loss, grads


# ---------------------------------------------------------------------------
# Training

@dataclass
class TrainConfig:
    epochs: int = 400
    batch_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    clip_norm: float = 1.0
    seed: int = 0
    aggregation: str = "mean"

    def __post_init__(self):
        if self.epochs <= 0 or self.batch_size <= 0 or self.learning_rate < 0:
            raise ValueError("epochs/batch_size must be positive, learning_rate >= 0")


class Adam:
    def __init__(self, params: ModelParams, cfg: TrainConfig):
        self.cfg = cfg
        self.m = {n: np.zeros_like(a) for n, a in params.arrays.items()}
        self.v = {n: np.zeros_like(a) for n, a in params.arrays.items()}
        self.step_count = 0

    def step(self, params: ModelParams, grads: Dict[str, np.ndarray]):
        cfg = self.cfg
        if cfg.clip_norm > 0:
            total = math.sqrt(sum(float((g * g).sum()) for g in
                                  (grads[n] for n in sorted(grads))))
            if total > cfg.clip_norm:
                scale = cfg.clip_norm / total
                grads = {n: g * scale for n, g in grads.items()}
        self.step_count += 1
        b1, b2 = cfg.beta1, cfg.beta2
        bc1 = 1.0 - b1 ** self.step_count
        bc2 = 1.0 - b2 ** self.step_count
        for n in sorted(grads):
            g = grads[n]
            self.m[n] = b1 * self.m[n] + (1 - b1) * g
            self.v[n] = b2 * self.v[n] + (1 - b2) * g * g
            m_hat = self.m[n] / bc1
            v_hat = self.v[n] / bc2
            params.arrays[n] -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)


def train(records, cfg: TrainConfig, sched: NoiseSchedule,
          params: Optional[ModelParams] = None,
          log_every: int = 0):
    """Minibatch Adam on the joint denoising loss.

    records: anything with .graph, .layout and .ppi (synth.DatasetRecord).
    Returns (params, per-epoch mean losses). Deterministic given cfg.seed.
    """
    if not records:
        raise ValueError("training requires a nonempty dataset")
    relations = sorted({e.relation for r in records for e in r.graph.edges},
                       key=lambda r: r.value)
    if params is None:
        params = ModelParams.init(relations, seed=cfg.seed, aggregation=cfg.aggregation)
    encodings = [encode_graph(r.graph, ppi=r.ppi) for r in records]
    p0s = [centers_of(r.layout, enc.object_ids)
           for r, enc in zip(records, encodings)]

    rng = np.random.default_rng(cfg.seed)
    opt = Adam(params, cfg)
    losses: List[float] = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(records))
        epoch_losses = []
        for lo in range(0, len(records), cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            encs = [encodings[i] for i in idx]
            p0 = np.concatenate([p0s[i] for i in idx])
            t_rec = rng.integers(0, sched.T, size=len(idx))
            eps = rng.standard_normal(size=p0.shape)
            loss, grads = loss_and_grads(params, encs, p0, t_rec, eps, sched)
            if not math.isfinite(loss):
                norms = {n: float(np.linalg.norm(a)) for n, a in params.arrays.items()}
                raise RuntimeError(
                    f"non-finite loss at epoch {epoch}: param norms {norms}, "
                    f"batch indices {idx.tolist()}, seed {cfg.seed}")
            if cfg.learning_rate > 0:
                opt.step(params, grads)
            epoch_losses.append(loss)
        losses.append(float(np.mean(epoch_losses)))
        if log_every and (epoch + 1) % log_every == 0:
            print(f"epoch {epoch + 1}/{cfg.epochs}: loss {losses[-1]:.4f}")
    return params, losses


# ---------------------------------------------------------------------------
# Checkpoint I/O: JSON header line + named little-endian float32 arrays

CHECKPOINT_SCHEMA = 1


def save_checkpoint(path, params: ModelParams, sched: NoiseSchedule,
                    train_seed: int = 0) -> None:
    names = params.names()
    header = {
        "schema_version": CHECKPOINT_SCHEMA,
        "latent_dim": params.latent_dim,
        "aggregation": params.aggregation,
        "relations": [r.value for r in params.relations],
        "schedule": {"T": sched.T, "beta_start": float(sched.beta[0]),
                     "beta_end": float(sched.beta[-1])},
        "train_seed": train_seed,
        "arrays": [{"name": n, "shape": list(params.arrays[n].shape)} for n in names],
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8"))
        fh.write(b"\n")
        for n in names:
            fh.write(params.arrays[n].astype("<f4").tobytes())


def load_checkpoint(path):
    """Returns (params, schedule, header). Raises CheckpointFormatError on
    any header/payload mismatch."""
    with open(path, "rb") as fh:
        header_line = fh.readline()
        payload = fh.read()
    try:
        header = json.loads(header_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointFormatError(f"unreadable checkpoint header: {exc}") from exc
    if header.get("schema_version") != CHECKPOINT_SCHEMA:
        raise CheckpointFormatError(f"unsupported schema {header.get('schema_version')}")
    try:
        relations = tuple(RelationType(r) for r in header["relations"])
        entries = header["arrays"]
        dim = int(header["latent_dim"])
        s = header["schedule"]
        sched = make_schedule(int(s["T"]), float(s["beta_start"]), float(s["beta_end"]))
    except (KeyError, ValueError) as exc:
        raise CheckpointFormatError(f"bad checkpoint header: {exc}") from exc

    expected = _shapes_for(relations, dim)
    arrays = {}
    pos = 0
    for entry in entries:
        name, shape = entry["name"], tuple(entry["shape"])
        if name not in expected:
            raise CheckpointFormatError(f"unexpected array '{name}'")
        if shape != expected[name]:
            raise CheckpointFormatError(
                f"array '{name}' has shape {shape}, expected {expected[name]}")
        size = int(np.prod(shape)) * 4
        chunk = payload[pos:pos + size]
        if len(chunk) != size:
            raise CheckpointFormatError(f"truncated payload at array '{name}'")
        arrays[name] = np.frombuffer(chunk, dtype="<f4").reshape(shape).astype(np.float64)
        pos += size
    if pos != len(payload):
        raise CheckpointFormatError(f"{len(payload) - pos} trailing bytes in payload")
    missing = set(expected) - set(arrays)
    if missing:
        raise CheckpointFormatError(f"missing arrays: {sorted(missing)}")
    params = ModelParams(arrays=arrays, relations=relations, latent_dim=dim,
                         aggregation=header.get("aggregation", "mean"))
    return params, sched, header
