#!/usr/bin/env python3
"""Compare the compiled sampling kernel against the numpy fallback.

Times single-chain sampling and batched sampling on representative scenes.
The compiled kernel fuses the per-step latent/update loops; the numpy path
leans on larger vectorized operations, so the gap narrows as the batch
grows. Run after `pip install -e . --no-build-isolation`:

    python3 benchmarks/bench_backends.py [--quick]
"""
import argparse
import time

from layoutdiff import backend
from layoutdiff.model import ModelParams, make_schedule
from layoutdiff.sampler import SamplerConfig, sample, sample_batch
from layoutdiff.scene import (Canvas, ObjectSpec, RelationEdge, RelationType,
                              SceneGraph)


def scene(n_objects):
    sizes = [(80, 60, 24), (8, 8, 24), (96, 60, 2), (60, 36, 30)][:n_objects]
    objects = tuple(ObjectSpec(id=f"obj{i}", size=s, attributes=())
                    for i, s in enumerate(sizes))
    edges = [RelationEdge(relation=RelationType.IN_SCENE, subject=o.id,
                          object="scene") for o in objects]
    rels = [RelationType.LEFT_OF, RelationType.CLOSE_TO, RelationType.TOP_OF]
    for i in range(n_objects - 1):
        edges.append(RelationEdge(relation=rels[i % 3], subject=f"obj{i}",
                                  object=f"obj{i + 1}"))
    return SceneGraph(objects=objects, edges=tuple(edges),
                      canvas=Canvas(1024, 1024), scene_label="bench")


def time_call(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true",
                    help="shorter schedule (T=200) and fewer repeats")
    args = ap.parse_args()

    T = 200 if args.quick else 1000
    repeats = 1 if args.quick else 2
    sched = make_schedule(T=T)
    params = ModelParams.init([RelationType.IN_SCENE, RelationType.LEFT_OF,
                               RelationType.CLOSE_TO, RelationType.TOP_OF],
                              seed=0)
    backends = backend.available_backends()
    print(f"backends: {', '.join(backends)}   (T={T}, K=2)\n")
    header = f"{'workload':<34}" + "".join(f"{b:>12}" for b in backends)
    print(header)
    print("-" * len(header))

    workloads = [("single sample, 2 objects", scene(2), 1),
                 ("single sample, 4 objects", scene(4), 1),
                 ("batch of 16, 2 objects", scene(2), 16),
                 ("batch of 16, 4 objects", scene(4), 16)]
    for label, g, n in workloads:
        cells = []
        for b in backends:
            cfg = SamplerConfig(seed=0, backend=b)
            if n == 1:
                dt = time_call(lambda: sample(g, params, sched, cfg), repeats)
            else:
                dt = time_call(lambda: sample_batch(g, params, sched, cfg, n),
                               repeats)
            per = dt / n
            cells.append(f"{per * 1000:9.0f} ms")
        print(f"{label:<34}" + "".join(f"{c:>12}" for c in cells))
    print("\n(times are best-of-{} per sample)".format(repeats))


if __name__ == "__main__":
    main()
