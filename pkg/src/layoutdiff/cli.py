"""Command-line entry point.

Every command with a --seed flag is bit-reproducible given identical inputs;
all randomness flows from explicit seeds. Exit codes: 0 ok, 1 domain failure
(conflicts, unsatisfiable constraints, validation), 2 usage, 3 I/O.
"""
from __future__ import annotations

import json
import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np
import yaml

from .errors import LayoutDiffError
from . import graphio
from .rules import RuleConfig, per_edge_verdicts, position_score

EXIT_DOMAIN = 1
EXIT_IO = 3


def _read_text(path):
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        click.echo(f"error: cannot read {path}: {exc}", err=True)
        sys.exit(EXIT_IO)


def _write_text(path, text):
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        click.echo(f"error: cannot write {path}: {exc}", err=True)
        sys.exit(EXIT_IO)


def _load_graph(path):
    try:
        return graphio.parse(_read_text(path))
    except LayoutDiffError as exc:
        click.echo(f"error: {path}: {exc}", err=True)
        sys.exit(EXIT_DOMAIN)


def _load_layout(path):
    from .synth import layout_from_mapping
    try:
        return layout_from_mapping(yaml.safe_load(_read_text(path)))
    except (KeyError, TypeError, ValueError) as exc:
        click.echo(f"error: bad layout file {path}: {exc}", err=True)
        sys.exit(EXIT_DOMAIN)


def _load_checkpoint(path):
    from .model import load_checkpoint
    try:
        return load_checkpoint(path)
    except FileNotFoundError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_IO)
    except LayoutDiffError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_DOMAIN)


def _rule_config(close, away):
    try:
        return RuleConfig(close_threshold=close, away_threshold=away)
    except ValueError as exc:
        raise click.UsageError(str(exc))


@click.group()
@click.version_option()
def main():
    """Scene-graph constrained layout generation."""


@main.command("gen-data")
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="Generator config (YAML); defaults are used when omitted.")
@click.option("--n", type=int, default=300, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
def gen_data(config_path, n, seed, out_path):
    """Generate a synthetic dataset (one JSON record per line)."""
    from .synth import GeneratorConfig, generate_dataset, save_dataset
    try:
        cfg = GeneratorConfig() if config_path is None else \
            GeneratorConfig.from_mapping(yaml.safe_load(_read_text(config_path)) or {})
        records = generate_dataset(cfg, n=n, seed=seed)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    except LayoutDiffError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_DOMAIN)
    save_dataset(records, out_path)
    click.echo(f"wrote {len(records)} records to {out_path}")


@main.command()
@click.option("--data", "data_path", type=click.Path(), required=True)
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="Training config (YAML).")
@click.option("--out", "out_path", type=click.Path(), required=True)
def train(data_path, config_path, out_path):
    """Train the composed denoisers; writes checkpoint + loss curve file."""
    from .model import TrainConfig, make_schedule, save_checkpoint
    from .model import train as run_train
    from .synth import load_dataset

    raw = {} if config_path is None else (yaml.safe_load(_read_text(config_path)) or {})
    sched_args = raw.pop("schedule", {})
    try:
        cfg = TrainConfig(**raw)
        sched = make_schedule(T=int(sched_args.get("T", 1000)),
                              beta_start=float(sched_args.get("beta_start", 1e-4)),
                              beta_end=float(sched_args.get("beta_end", 0.02)))
    except (TypeError, ValueError) as exc:
        raise click.UsageError(f"bad training config: {exc}")
    records = load_dataset(data_path)
    if not records:
        click.echo("error: dataset is empty", err=True)
        sys.exit(EXIT_DOMAIN)
    try:
        params, losses = run_train(records, cfg, sched, log_every=10)
    except RuntimeError as exc:
        click.echo(f"error: training aborted: {exc}", err=True)
        sys.exit(EXIT_DOMAIN)
    save_checkpoint(out_path, params, sched, train_seed=cfg.seed)
    loss_path = str(out_path) + ".loss.json"
    _write_text(loss_path, json.dumps({"epoch_mean_loss": losses}, indent=2) + "\n")
    click.echo(f"saved checkpoint to {out_path} "
               f"({params.param_count()} parameters), loss curve to {loss_path}")


@main.command()
@click.option("--graph", "graph_path", type=click.Path(), required=True)
@click.option("--ckpt", "ckpt_path", type=click.Path(), required=True)
@click.option("--n", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--steps-per-level", type=int, default=None,
              help="Langevin steps per noise level (default from sampler).")
@click.option("--base-step", type=float, default=None)
@click.option("--noise-scale", type=float, default=None)
@click.option("--backend", type=click.Choice(["compiled", "numpy"]), default=None)
def sample(graph_path, ckpt_path, n, seed, out_dir, steps_per_level, base_step,
           noise_scale, backend):
    """Sample layouts for a graph from a trained checkpoint."""
    from .sampler import SamplerConfig, sample_batch
    from .synth import layout_to_mapping

    g = _load_graph(graph_path)
    params, sched, _header = _load_checkpoint(ckpt_path)
    cfg = SamplerConfig(seed=seed)
    overrides = {k: v for k, v in [("steps_per_level", steps_per_level),
                                   ("base_step", base_step),
                                   ("noise_scale", noise_scale),
                                   ("backend", backend)] if v is not None}
    cfg = replace(cfg, **overrides)
    try:
        layouts, summary = sample_batch(g, params, sched, cfg, n)
    except LayoutDiffError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_DOMAIN)
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        click.echo(f"error: cannot create {out_dir}: {exc}", err=True)
        sys.exit(EXIT_IO)
    for i, lay in enumerate(layouts):
        _write_text(out / f"layout_{i:03d}.yaml",
                    yaml.safe_dump(layout_to_mapping(lay), sort_keys=False))
    _write_text(out / "scores.json", json.dumps({
        "mean_score": summary.mean_score, "min_score": summary.min_score,
        "max_score": summary.max_score, "scores": list(summary.scores)},
        indent=2) + "\n")
    click.echo(f"wrote {n} layout(s) to {out_dir}; "
               f"mean position score {summary.mean_score:.4f}")


@main.command()
@click.option("--graph", "graph_path", type=click.Path(), required=True)
@click.option("--layout", "layout_path", type=click.Path(), required=True)
@click.option("--close-threshold", type=float, default=0.25, show_default=True)
@click.option("--away-threshold", type=float, default=0.50, show_default=True)
def score(graph_path, layout_path, close_threshold, away_threshold):
    """Position score and per-edge verdicts for a layout."""
    g = _load_graph(graph_path)
    layout = _load_layout(layout_path)
    cfg = _rule_config(close_threshold, away_threshold)
    try:
        total = position_score(g, layout, cfg)
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_DOMAIN)
    for edge, ok in per_edge_verdicts(g, layout, cfg):
        click.echo(f"{'PASS' if ok else 'FAIL'}  {edge}")
    click.echo(f"{total:.4f}")


@main.command("check-graph")
@click.argument("graph_path", type=click.Path())
@click.option("--strict", is_flag=True,
              help="Restrict antisymmetry checks to the reference protocol set.")
def check_graph(graph_path, strict):
    """Validate a graph: conflicts, coverage, degree. Exit 1 on conflict."""
    g = _load_graph(graph_path)
    report = graphio.detect_conflicts(g, strict=strict)
    click.echo(f"objects: {len(g.objects)}")
    click.echo(f"edges: {len(g.edges)}")
    click.echo(f"relationship coverage: {graphio.relationship_coverage(g):.4f}")
    click.echo(f"mean degree: {graphio.mean_degree(g):.4f}")
    if report:
        click.echo(f"conflicts: {len(report)}")
        for c in report:
            click.echo(f"  {c}")
        sys.exit(EXIT_DOMAIN)
    click.echo("conflicts: 0")


@main.command("eval")
@click.option("--suite", "suite_dir", type=click.Path(), required=True,
              help="Directory of graph documents (*.yaml).")
@click.option("--ckpt", "ckpt_path", type=click.Path(), default=None)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--samples-per-graph", type=int, default=3, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--compare/--no-compare", default=False,
              help="Also run the baseline placers.")
def eval_cmd(suite_dir, ckpt_path, out_path, samples_per_graph, seed, compare):
    """Evaluate a suite of graphs; writes text + JSON reports."""
    from .evalharness import compare_methods, evaluate_suite, format_report, report_to_json
    from .sampler import SamplerConfig

    paths = sorted(Path(suite_dir).glob("*.yaml"))
    if not paths:
        click.echo(f"error: no *.yaml graphs under {suite_dir}", err=True)
        sys.exit(EXIT_IO)
    suite = [_load_graph(p) for p in paths]
    params = sched = None
    if ckpt_path is not None:
        params, sched, _ = _load_checkpoint(ckpt_path)
    cfg = SamplerConfig(seed=seed)
    if compare:
        rows = compare_methods(suite, params, sched, cfg,
                               samples_per_graph=samples_per_graph)
    elif params is not None:
        rows = [evaluate_suite(suite, params, sched, cfg,
                               samples_per_graph=samples_per_graph)]
    else:
        raise click.UsageError("need --ckpt and/or --compare")
    text = format_report(rows)
    click.echo(text, nl=False)
    _write_text(out_path, report_to_json(rows))
    click.echo(f"wrote report to {out_path}")


@main.command()
@click.option("--graph", "graph_path", type=click.Path(), required=True)
@click.option("--layout", "layout_path", type=click.Path(), required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--edges/--no-edges", "draw_edges", default=True, show_default=True)
def render(graph_path, layout_path, out_path, draw_edges):
    """Render a layout to SVG."""
    from .render import RenderOptions, render_svg

    g = _load_graph(graph_path)
    layout = _load_layout(layout_path)
    try:
        svg = render_svg(g, layout, RenderOptions(draw_edges=draw_edges))
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_DOMAIN)
    _write_text(out_path, svg)
    click.echo(f"wrote {out_path}")


@main.command()
@click.option("--request", "request_path", type=click.Path(), required=True)
@click.option("--endpoint", type=str, default=None,
              help="Remote planner base URL; the offline mock is used when omitted.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Write the full plan response (YAML); stdout otherwise.")
@click.option("--graph-out", type=click.Path(), default=None,
              help="Also write just the planned graph document.")
def plan(request_path, endpoint, seed, out_path, graph_out):
    """Produce a scene plan from a request document."""
    from . import planner

    try:
        req = planner.request_from_mapping(yaml.safe_load(_read_text(request_path)))
    except (KeyError, TypeError, ValueError) as exc:
        click.echo(f"error: bad plan request: {exc}", err=True)
        sys.exit(EXIT_DOMAIN)
    try:
        if endpoint is None:
            resp = planner.mock_plan(req, seed=seed)
        else:
            resp = planner.remote_plan(req, planner.EndpointConfig(url=endpoint))
    except LayoutDiffError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_DOMAIN)
    doc = yaml.safe_dump(planner.response_to_mapping(resp), sort_keys=False)
    if out_path is None:
        click.echo(doc, nl=False)
    else:
        _write_text(out_path, doc)
        click.echo(f"wrote plan to {out_path}")
    if graph_out is not None:
        _write_text(graph_out, graphio.serialize(resp.graph))
        click.echo(f"wrote graph to {graph_out}")


if __name__ == "__main__":
    main()
