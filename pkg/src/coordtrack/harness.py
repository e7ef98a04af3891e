"""Experiment orchestration: configs, ensembles, CSV/summary emission, presets.

A config is a JSON document with ``topology`` and ``signal`` sections plus run
parameters.  Ensemble members run in a thread pool (capped by the
``COORD_SIM_THREADS`` environment variable); member-level determinism makes the
schedule irrelevant to the outputs.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import algorithms, graph, metrics, selection, signals

CSV_HEADER = "iter,member,entry,msd,max_err,scalars_sent"
MEAN_MEMBER = -1

PRESETS = ("fig3", "fig4", "fig6", "fig7")

TOPOLOGY_KINDS = ("cycle", "complete", "geometric", "edges", "file")


class ConfigError(ValueError):
    """Invalid experiment configuration; message carries a line reference."""


def _fmt(x):
    """Base-10 decimal with 17 significant digits (exact float round-trip)."""
    return format(float(x), ".17g")


def member_seed(seed, member):
    """Decorrelated per-member seed, a pure function of (seed, member)."""
    mixed = selection._fmix64(np.uint64(int(seed) % 2 ** 64)
                              ^ selection._fmix64(np.uint64(member)))
    return int(mixed)


@dataclass
class ExperimentConfig:
    """Validated experiment description (see :func:`load_config`)."""

    topology: dict
    signal: dict
    algorithm: str
    iterations: int
    ensemble_size: int = 1
    seed: int = 0
    record_every: int = 1
    plot_entry: int = 0
    mu: float = 1.0
    selection_mode: str | None = None
    output: str | None = None
    name: str = "experiment"

    def __post_init__(self):
        if self.algorithm not in algorithms.ALGORITHMS:
            raise ConfigError(
                f"unknown algorithm {self.algorithm!r}; choose from "
                f"{list(algorithms.ALGORITHMS)}")
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if self.ensemble_size < 1:
            raise ConfigError("ensemble_size must be >= 1")
        if self.record_every < 1:
            raise ConfigError("record_every must be >= 1")
        if not isinstance(self.topology, dict) or "kind" not in self.topology:
            raise ConfigError("topology section must be a mapping with a 'kind'")
        if self.topology["kind"] not in TOPOLOGY_KINDS:
            raise ConfigError(
                f"unknown topology kind {self.topology['kind']!r}; choose from "
                f"{list(TOPOLOGY_KINDS)}")
        if not isinstance(self.signal, dict) or "variant" not in self.signal:
            raise ConfigError("signal section must be a mapping with a 'variant'")
        if self.plot_entry < 0:
            raise ConfigError("plot_entry must be >= 0")


def _line_of(text, key):
    """1-based line of the first occurrence of a JSON key, for diagnostics."""
    needle = f'"{key}"'
    for no, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return no
    return None


def parse_config(text, source="<config>"):
    """Parse and validate a JSON config, raising ConfigError with line numbers."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{source}:1: config must be a JSON object")
    unknown = set(doc) - set(ExperimentConfig.__dataclass_fields__)
    if unknown:
        key = sorted(unknown)[0]
        line = _line_of(text, key) or 1
        raise ConfigError(f"{source}:{line}: unknown config key {key!r}")
    for required in ("topology", "signal", "algorithm", "iterations"):
        if required not in doc:
            raise ConfigError(f"{source}:1: missing required key {required!r}")
    try:
        return ExperimentConfig(**doc)
    except ConfigError as exc:
        for key in ("algorithm", "iterations", "ensemble_size", "record_every",
                    "topology", "signal", "plot_entry"):
            if key in str(exc):
                line = _line_of(text, key)
                if line is not None:
                    raise ConfigError(f"{source}:{line}: {exc}") from exc
        raise ConfigError(f"{source}:1: {exc}") from exc


def load_config(path):
    path = Path(path)
    return parse_config(path.read_text(), source=str(path))


def build_topology(spec):
    """Topology from a config section: cycle/complete/geometric/edges/file."""
    spec = dict(spec)
    kind = spec.pop("kind")
    if kind == "cycle":
        return graph.build_cycle(spec["num_agents"])
    if kind == "complete":
        return graph.build_complete(spec["num_agents"])
    if kind == "geometric":
        return graph.build_connected_geometric(
            spec["num_agents"], spec["radius"], spec.get("seed", 0))
    if kind == "edges":
        return graph.Topology.from_edges(spec["num_agents"], spec["edges"])
    if kind == "file":
        return graph.Topology.from_json(Path(spec["path"]).read_text())
    raise ConfigError(f"unknown topology kind {kind!r}")


def _member_model(cfg, member):
    spec = dict(cfg.signal)
    K = cfg.topology.get("num_agents")
    if K is None:  # topology from file: read it once for the agent count
        K = build_topology(cfg.topology).num_agents
    if cfg.ensemble_size > 1 and spec.get("variant") != "custom":
        spec["seed"] = member_seed(spec.get("seed", 0), member)
    return signals.make_signal(spec, K)


def run_member(cfg, A, member):
    """Run one ensemble member; returns its list of MetricsRecords."""
    model = _member_model(cfg, member)
    run = algorithms.init_run(
        A, model, cfg.algorithm, seed=member_seed(cfg.seed, member),
        mu=cfg.mu, selection_mode=cfg.selection_mode)
    records = []
    while run.iteration < cfg.iterations:
        gap = min(cfg.record_every - run.iteration % cfg.record_every,
                  cfg.iterations - run.iteration)
        algorithms.fast_forward(run, gap)
        records.append(metrics.record(run, model.true_average(run.iteration)))
    return records


def _max_workers():
    env = os.environ.get("COORD_SIM_THREADS")
    if env:
        n = int(env)
        if n < 1:
            raise ValueError("COORD_SIM_THREADS must be >= 1")
        return n
    return min(8, os.cpu_count() or 1)


def run_ensemble(cfg, A):
    """All ensemble members, in a worker pool; results ordered by member index."""
    if cfg.ensemble_size == 1:
        return [run_member(cfg, A, 0)]
    with ThreadPoolExecutor(max_workers=_max_workers()) as pool:
        futures = [pool.submit(run_member, cfg, A, m)
                   for m in range(cfg.ensemble_size)]
        return [f.result() for f in futures]


def write_csv(path, all_records, plot_entry):
    """Emit member rows then mean rows (member = -1) in the stable schema."""
    lines = [CSV_HEADER]
    for m, records in enumerate(all_records):
        for rec in records:
            lines.append(",".join([
                str(rec.iteration), str(m), str(plot_entry),
                _fmt(rec.per_entry_msd[plot_entry]), _fmt(rec.max_norm_err),
                str(rec.cumulative_scalars_sent)]))
    n_members = len(all_records)
    for j in range(len(all_records[0])):
        recs = [member[j] for member in all_records]
        lines.append(",".join([
            str(recs[0].iteration), str(MEAN_MEMBER), str(plot_entry),
            _fmt(sum(r.per_entry_msd[plot_entry] for r in recs) / n_members),
            _fmt(sum(r.max_norm_err for r in recs) / n_members),
            str(recs[0].cumulative_scalars_sent)]))
    Path(path).write_text("\n".join(lines) + "\n")


def summarize(cfg, A, all_records):
    """Summary mapping: spectral gap, comm totals, final errors, fitted rate."""
    lam = graph.second_eigenvalue_magnitude(A)
    n_members = len(all_records)
    mean_curve = [(recs[0].iteration,
                   sum(r.aggregate_msd for r in recs) / n_members)
                  for recs in zip(*all_records)]
    summary = {
        "name": cfg.name,
        "algorithm": cfg.algorithm,
        "num_agents": int(A.shape[0]),
        "dimension": len(all_records[0][0].per_entry_msd),
        "iterations": cfg.iterations,
        "ensemble_size": cfg.ensemble_size,
        "seed": cfg.seed,
        "second_eigenvalue_magnitude": lam,
        "scalars_sent_per_agent": all_records[0][-1].cumulative_scalars_sent,
        "final_mean_msd": mean_curve[-1][1],
        "fitted_rate": None,
        "fit_r_squared": None,
    }
    try:
        rate, r2 = metrics.fit_geometric_rate(mean_curve)
        summary["fitted_rate"] = rate
        summary["fit_r_squared"] = r2
    except ValueError:
        pass
    return summary


def run_experiment(cfg, output_dir=None):
    """Execute a config: writes ``<name>.csv`` and ``<name>_summary.json``.

    Returns (csv_path, summary_path, summary dict).
    """
    out = Path(output_dir or cfg.output or ".")
    out.mkdir(parents=True, exist_ok=True)
    topo = build_topology(cfg.topology)
    A = graph.metropolis_weights(topo)
    graph.check_combination_matrix(A, topo)
    dimension = _member_model(cfg, 0).dimension
    if cfg.plot_entry >= dimension:
        raise ConfigError(
            f"plot_entry {cfg.plot_entry} out of range for dimension {dimension}")
    all_records = run_ensemble(cfg, A)
    csv_path = out / f"{cfg.name}.csv"
    write_csv(csv_path, all_records, cfg.plot_entry)
    summary = summarize(cfg, A, all_records)
    summary_path = out / f"{cfg.name}_summary.json"
    summary_path.write_text(json.dumps(summary, indent=2) + "\n")
    return csv_path, summary_path, summary


def load_preset(name):
    """Named preset: list of curve configs bundled with the package."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {list(PRESETS)}")
    text = (resources.files("coordtrack") / "presets" / f"{name}.json").read_text()
    doc = json.loads(text)
    return [ExperimentConfig(**curve) for curve in doc["curves"]]


def run_comparison_suite(name, output_dir, iterations=None):
    """Run every curve of a preset; emits one CSV per curve plus a manifest."""
    configs = load_preset(name)
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"preset": name, "curves": []}
    for cfg in configs:
        if iterations is not None:
            cfg.iterations = iterations
        csv_path, summary_path, summary = run_experiment(cfg, out)
        manifest["curves"].append({
            "name": cfg.name,
            "algorithm": cfg.algorithm,
            "csv": csv_path.name,
            "summary": summary_path.name,
            "second_eigenvalue_magnitude": summary["second_eigenvalue_magnitude"],
            "final_mean_msd": summary["final_mean_msd"],
        })
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest_path, manifest
