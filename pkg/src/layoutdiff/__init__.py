"""Scene-graph constrained 2D layout generation.

Per-relation diffusion denoisers are composed into a joint model and sampled
with annealed Langevin dynamics; exact rule predicates score the results.
"""

__version__ = "0.1.0"

from .scene import (BoundingBox, Canvas, Layout, ObjectSpec, RelationEdge,
                    RelationType, SceneGraph, SCENE, auto_ppi, derive_extent)
from .graphio import (ConflictReport, detect_conflicts, mean_degree, parse,
                      relationship_coverage, serialize)
from .rules import RuleConfig, energy, holds, position_score
from .model import (ModelParams, NoiseSchedule, TrainConfig, forward_noise,
                    load_checkpoint, make_schedule, predict_eps_composed,
                    save_checkpoint, train)
from .sampler import SamplerConfig, sample, sample_analytic, sample_batch
from .synth import DatasetRecord, GeneratorConfig, generate_dataset
from .planner import PlanRequest, PlanResponse, mock_plan, remote_plan
from .render import render_svg
from .evalharness import compare_methods, evaluate_suite, size_iou

__all__ = [
    "BoundingBox", "Canvas", "Layout", "ObjectSpec", "RelationEdge",
    "RelationType", "SceneGraph", "SCENE", "auto_ppi", "derive_extent",
    "ConflictReport", "detect_conflicts", "mean_degree", "parse",
    "relationship_coverage", "serialize",
    "RuleConfig", "energy", "holds", "position_score",
    "ModelParams", "NoiseSchedule", "TrainConfig", "forward_noise",
    "load_checkpoint", "make_schedule", "predict_eps_composed",
    "save_checkpoint", "train",
    "SamplerConfig", "sample", "sample_analytic", "sample_batch",
    "DatasetRecord", "GeneratorConfig", "generate_dataset",
    "PlanRequest", "PlanResponse", "mock_plan", "remote_plan",
    "render_svg",
    "compare_methods", "evaluate_suite", "size_iou",
]
