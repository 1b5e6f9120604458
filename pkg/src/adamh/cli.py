"""Configuration-driven benchmark runner.

Experiment specs are flat ``key = value`` text files with dotted sections
(``sampler.kind``, ``run.iterations``, ...).  Each run writes post-burn-in
draws, a structured JSON report, plot-ready trace/histogram tables and
rendered PNG figures into a per-sampler directory.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .diagnostics import summarize
from .engine import ChainHistory, RunConfig, run_matrix
from .plots import render_figures
from .targets import (BimodalTarget, Dataset, LogisticTarget, PriorSpec,
                      ProbitReTarget, QuantileTarget)

FLOAT_FMT = "%.17g"


# --- dataset ingestion / emission ---------------------------------------------

def ingest_csv(path) -> Dataset:
    """Read a dataset: header row, a ``y`` response column, an optional
    ``group`` column, all remaining columns numeric covariates in order."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        cols = [c.strip() for c in header.split(",")]
        if "y" not in cols:
            raise ValueError(f"{path}: missing required response column 'y'")
        y_idx = cols.index("y")
        g_idx = cols.index("group") if "group" in cols else None
        feat_idx = [i for i in range(len(cols)) if i not in (y_idx, g_idx)]
        rows, ys, gs = [], [], []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if len(cells) != len(cols):
                raise ValueError(f"{path}:{lineno}: expected {len(cols)} cells")
            try:
                vals = [float(c) for c in cells]
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: non-numeric cell") from exc
            if any(math.isnan(v) for v in vals):
                raise ValueError(f"{path}:{lineno}: NaN cell")
            ys.append(vals[y_idx])
            if g_idx is not None:
                gs.append(int(vals[g_idx]))
            rows.append([vals[i] for i in feat_idx])
    return Dataset(design=np.asarray(rows), response=np.asarray(ys),
                   group_index=np.asarray(gs, int) if g_idx is not None else None)


def emit_csv(data: Dataset, path) -> None:
    path = Path(path)
    cols = ["y"] + [f"x{j}" for j in range(data.n_features)]
    mat = np.column_stack([data.response, data.design])
    if data.group_index is not None:
        cols.append("group")
        mat = np.column_stack([mat, data.group_index.astype(float)])
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for row in mat:
            fh.write(",".join(FLOAT_FMT % v for v in row) + "\n")


# --- synthetic data -----------------------------------------------------------

def synth_logistic(n: int, d: int, seed: int) -> Dataset:
    rng = np.random.default_rng(seed)
    x = np.column_stack([np.ones(n), rng.standard_normal((n, d - 1))])
    beta = _true_beta(d)
    p = 1.0 / (1.0 + np.exp(-(x @ beta)))
    return Dataset(design=x, response=(rng.random(n) < p).astype(float))


def synth_quantile(n: int, d: int, seed: int) -> Dataset:
    rng = np.random.default_rng(seed)
    x = np.column_stack([np.ones(n), rng.standard_normal((n, d - 1))])
    beta = _true_beta(d)
    y = x @ beta + rng.standard_normal(n)
    return Dataset(design=x, response=y)


def synth_probit_re(groups: int, obs: int, d: int, seed: int,
                    sigma_mu: float = 1.0) -> Dataset:
    rng = np.random.default_rng(seed)
    n = groups * obs
    x = np.column_stack([np.ones(n), rng.standard_normal((n, d - 1))])
    beta = _true_beta(d)
    g = np.repeat(np.arange(1, groups + 1), obs)
    mu = sigma_mu * rng.standard_normal(groups)
    from scipy.special import ndtr
    p = ndtr(mu[g - 1] + x @ beta)
    return Dataset(design=x, response=(rng.random(n) < p).astype(float),
                   group_index=g)


def _true_beta(d: int) -> np.ndarray:
    base = np.array([0.3, 1.0, -1.0, 0.5, -0.5])
    return np.resize(base, d)


# --- spec parsing -------------------------------------------------------------

@dataclass
class ExperimentSpec:
    name: str
    options: dict
    out_dir: Path
    seed: int
    jobs: int = 1
    emit: tuple = ("draws", "report", "tracedata")

    def __post_init__(self):
        if self.seed is None:
            raise ValueError("a seed is mandatory (run.seed or --seed)")


def parse_spec_text(text: str) -> dict:
    opts = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        opts[key] = value
    return opts


def _get(opts, key, default=None, cast=str):
    if key not in opts:
        if default is None and cast is not bool:
            return None
        return default
    return cast(opts[key])


def _schedule(opts):
    raw = opts.get("run.schedule", "").strip()
    if not raw:
        return ()
    return tuple(int(s) for s in raw.split(","))


def build_dataset(opts, out_dir: Path | None = None) -> Dataset | None:
    if "data.path" in opts:
        return ingest_csv(opts["data.path"])
    kind = opts.get("data.synthetic")
    if kind is None:
        return None
    seed = int(opts.get("data.seed", 1))
    if kind == "logistic":
        data = synth_logistic(int(opts.get("data.n", 500)),
                              int(opts.get("data.d", 5)), seed)
    elif kind == "quantile":
        data = synth_quantile(int(opts.get("data.n", 500)),
                              int(opts.get("data.d", 5)), seed)
    elif kind == "probit_re":
        data = synth_probit_re(int(opts.get("data.groups", 20)),
                               int(opts.get("data.obs", 8)),
                               int(opts.get("data.d", 3)), seed)
    else:
        raise ValueError(f"unknown synthetic dataset kind {kind!r}")
    if out_dir is not None:
        emit_csv(data, out_dir / "dataset.csv")
    return data


def build_target(opts, data: Dataset | None):
    kind = opts.get("target.kind", "logistic")
    if kind == "bimodal":
        return BimodalTarget(dim=int(opts.get("target.dim", 5)),
                             mode=float(opts.get("target.mode", 3.0)))
    prior = PriorSpec(kind=opts.get("prior.kind", "normal"),
                      tau_s2=float(opts.get("prior.tau_s2", 0.01)),
                      tau_l2=float(opts.get("prior.tau_l2", 1e4)))
    if data is None:
        raise ValueError(f"target {kind!r} needs data.path or data.synthetic")
    if kind == "logistic":
        return LogisticTarget(data=data, prior=prior)
    if kind == "quantile":
        return QuantileTarget(data=data, prior=prior,
                              delta=float(opts.get("target.delta", 0.5)))
    if kind == "probit_re":
        return ProbitReTarget(
            data=data, prior=prior,
            m_draws=int(opts.get("importance.m", 100)),
            kappa=float(opts.get("importance.kappa", 4.0)),
            refresh_interval=int(opts.get("importance.l", 100)),
            refresh_by=opts.get("importance.refresh_by", "accepted"))
    raise ValueError(f"unknown target kind {kind!r}")


def build_configs(spec: ExperimentSpec, data: Dataset | None) -> list[RunConfig]:
    opts = spec.options
    kinds = [k.strip() for k in opts.get("sampler.kind", "rwm3c").split(",")]
    x0 = None
    if "run.x0" in opts:
        x0 = np.array([float(v) for v in opts["run.x0"].split(",")])
    configs = []
    for kind in kinds:
        target = build_target(opts, data)  # fresh state per chain
        configs.append(RunConfig(
            target=target,
            sampler=kind,
            iterations=int(opts.get("run.iterations", 20000)),
            burn_in=int(opts.get("run.burn_in", 5000)),
            seed=spec.seed,
            stage1_end=int(opts.get("run.stage1_end", 0)),
            schedule=_schedule(opts),
            x0=x0,
            n0=int(opts["sampler.n0"]) if "sampler.n0" in opts else None,
            kappa3=float(opts.get("sampler.kappa3", 25.0)),
            prelim_iterations=int(opts.get("sampler.prelim", 1000)),
            label=kind))
    return configs


# --- output writers -----------------------------------------------------------

def _write_draws(path: Path, names, draws):
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(names) + "\n")
        for row in draws:
            fh.write(",".join(FLOAT_FMT % v for v in row) + "\n")


def _write_trace_hist(out_dir: Path, names, draws):
    n = draws.shape[0]
    stride = max(1, n // 2000)
    for j, name in enumerate(names):
        col = draws[:, j]
        with (out_dir / f"trace_{name}.csv").open("w", encoding="utf-8",
                                                  newline="\n") as fh:
            fh.write("iteration,value\n")
            for i in range(0, n, stride):
                fh.write(f"{i}," + FLOAT_FMT % col[i] + "\n")
        counts, edges = np.histogram(col, bins=50)
        with (out_dir / f"hist_{name}.csv").open("w", encoding="utf-8",
                                                 newline="\n") as fh:
            fh.write("bin_left,bin_right,count\n")
            for k in range(50):
                fh.write(FLOAT_FMT % edges[k] + "," + FLOAT_FMT % edges[k + 1]
                         + f",{counts[k]}\n")


def _json_safe(v):
    if isinstance(v, float) and math.isnan(v):
        return None
    return v


def report_dict(report) -> dict:
    per = {name: {"mean": float(report.post_mean[j]),
                  "sd": float(report.post_sd[j]),
                  "if": _json_safe(float(report.if_values[j])),
                  "ess": _json_safe(float(report.ess_values[j]))}
           for j, name in enumerate(report.names)}
    return {
        "acceptance_rate": report.acceptance_rate,
        "if_min": _json_safe(report.if_min),
        "if_median": _json_safe(report.if_median),
        "if_max": _json_safe(report.if_max),
        "ess": {n: per[n]["ess"] for n in per},
        "mean": {n: per[n]["mean"] for n in per},
        "sd": {n: per[n]["sd"] for n in per},
        "ect": _json_safe(report.ect),
        "time_per_iteration": report.time_per_iteration,
        "parameters": per,
        "undefined_if": list(report.undefined),
    }


def _write_events(path: Path, events):
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("iteration,event\n")
        for it, ev in events:
            fh.write(f"{it},{ev}\n")


def run_experiment(spec: ExperimentSpec) -> int:
    """Run every sampler in the spec and emit draws, report, plot data and
    figures per sampler directory.  Returns a process exit status."""
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    data = build_dataset(spec.options, spec.out_dir)
    configs = build_configs(spec, data)
    results = run_matrix(configs, jobs=spec.jobs)
    status = 0
    for cfg, result in zip(configs, results):
        run_dir = spec.out_dir / cfg.label
        run_dir.mkdir(parents=True, exist_ok=True)
        if isinstance(result, Exception):
            status = 1
            (run_dir / "error.txt").write_text(f"{result}\n", encoding="utf-8")
            continue
        history: ChainHistory = result
        draws = history.iterates[cfg.burn_in:]
        if "draws" in spec.emit:
            _write_draws(run_dir / "draws.csv", history.names, draws)
        if "report" in spec.emit:
            report = summarize(history, cfg.burn_in)
            payload = report_dict(report)
            (run_dir / "report.json").write_text(
                json.dumps(payload, indent=2, sort_keys=True) + "\n",
                encoding="utf-8")
            render_figures(run_dir, history.names, draws)
        if "tracedata" in spec.emit:
            _write_trace_hist(run_dir, history.names, draws)
        _write_events(run_dir / "events.csv", history.events)
    return status


# --- presets -------------------------------------------------------------------

_DESK_SCHEDULE = "50,100,150,200,300,500,700,1000,2000,3000,5000,7500,10000"


def builtin_experiments() -> list[tuple[str, dict]]:
    """Named desk-size presets mirroring the built-in benchmark shapes."""
    return [
        ("fig1-bimodal", {
            "target.kind": "bimodal",
            "target.dim": "5",
            "sampler.kind": "rwm3c",
            "sampler.kappa3": "16",
            "run.x0": "-3,-3,-3,-3,-3",
            "run.iterations": "50000",
            "run.burn_in": "5000",
            "run.seed": "20260823",
        }),
        ("logistic-synthetic", {
            "target.kind": "logistic",
            "data.synthetic": "logistic",
            "data.n": "500",
            "data.d": "5",
            "data.seed": "7",
            "prior.kind": "normal",
            "sampler.kind": "imh_tct",
            "run.iterations": "20000",
            "run.burn_in": "10000",
            "run.stage1_end": "5000",
            "run.schedule": _DESK_SCHEDULE,
            "run.seed": "20260823",
        }),
        ("quantile-synthetic-d0.1", {
            "target.kind": "quantile",
            "target.delta": "0.1",
            "data.synthetic": "quantile",
            "data.n": "500",
            "data.d": "5",
            "data.seed": "7",
            "prior.kind": "normal",
            "sampler.kind": "imh_mn",
            "run.iterations": "20000",
            "run.burn_in": "10000",
            "run.stage1_end": "5000",
            "run.schedule": _DESK_SCHEDULE,
            "run.seed": "20260823",
        }),
        ("probit-re-synthetic", {
            "target.kind": "probit_re",
            "data.synthetic": "probit_re",
            "data.groups": "20",
            "data.obs": "8",
            "data.d": "3",
            "data.seed": "7",
            "prior.kind": "normal",
            "importance.m": "100",
            "importance.l": "100",
            "importance.kappa": "4",
            "sampler.kind": "imh_tct",
            "run.iterations": "8000",
            "run.burn_in": "4000",
            "run.stage1_end": "2000",
            "run.schedule": "20,50,100,150,200,300,400,500,700,1000,1500,2000,3000,5000",
            "run.seed": "20260823",
        }),
    ]


def _spec_from_options(name, opts, args) -> ExperimentSpec:
    seed = args.seed if args.seed is not None else (
        int(opts["run.seed"]) if "run.seed" in opts else None)
    if seed is not None:
        opts = dict(opts)
    out = Path(args.out) if args.out else Path(name)
    return ExperimentSpec(name=name, options=opts, out_dir=out,
                          seed=seed, jobs=args.jobs)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="adamh",
                                     description="Adaptive MH benchmark runner")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in ("run", "preset"):
        p = sub.add_parser(cmd)
        if cmd == "run":
            p.add_argument("spec_file", help="flat key=value experiment spec")
        else:
            p.add_argument("name", nargs="?", help="preset name (omit to list)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--out", default=None)
    args = parser.parse_args(argv)

    if args.command == "run":
        opts = parse_spec_text(Path(args.spec_file).read_text(encoding="utf-8"))
        spec = _spec_from_options(Path(args.spec_file).stem, opts, args)
        return run_experiment(spec)

    presets = dict(builtin_experiments())
    if args.name is None:
        for name in presets:
            print(name)
        return 0
    if args.name not in presets:
        print(f"unknown preset {args.name!r}", file=sys.stderr)
        return 2
    spec = _spec_from_options(args.name, presets[args.name], args)
    return run_experiment(spec)


if __name__ == "__main__":
    sys.exit(main())
