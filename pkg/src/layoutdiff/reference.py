"""Reference pipeline configuration.

The recipe that produces the checkpoint used by the acceptance suite and
the documented examples: 2-3 object training scenes over the left-of /
close-to / top-of vocabulary, ground truth held a small margin inside
predicate boundaries, and a sampler tuned on that checkpoint. Measured
single-relation satisfaction with this recipe is >= 0.95 per relation.
"""
from .model import TrainConfig
from .sampler import SamplerConfig
from .synth import GeneratorConfig

REFERENCE_RELATIONS = ("left-of", "close-to", "top-of")
REFERENCE_DATASET_SEED = 10
REFERENCE_DATASET_SIZE = 1500


def reference_generator_config(**overrides) -> GeneratorConfig:
    kwargs = dict(object_count=(2, 3), binary_edges=(1, 2), margin=0.04,
                  relation_weights={r: 1.0 for r in REFERENCE_RELATIONS})
    kwargs.update(overrides)
    return GeneratorConfig(**kwargs)


def reference_train_config(**overrides) -> TrainConfig:
    kwargs = dict(epochs=300, batch_size=32, learning_rate=1e-3, seed=0)
    kwargs.update(overrides)
    return TrainConfig(**kwargs)


# Tuned on the reference checkpoint: slightly reduced injected noise
# concentrates samples inside rule boundaries.
REFERENCE_SAMPLER = SamplerConfig(base_step=2e-4, noise_scale=0.8)
