"""Experiment orchestration: scheduler x seeds runs, trace CSVs and summaries."""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .adaptive import AdaptiveScheduler, SingleChannelScheduler
from .config import RunConfig
from .environment import Optimum, RunTrace, SuccessSchedule, simulate, solve_p2_reference
from .ucb import UcbScheduler

OUTPUT_ENV = "FAIRMAC_OUTPUT_DIR"
CSV_HEADER = ("t", "segment", "utility_running", "phi_star", "queue_max", "assigned_pairs", "successes")
SUMMARY_HEADER = ("scheduler", "seed", "segment", "start", "end", "final_utility", "phi_star", "gap")


def make_scheduler(config: RunConfig, name: str):
    p = config.params_for(name)
    if name == "adaptive":
        return AdaptiveScheduler(config.n, config.m, config.utility, p.V, p.eta, p.eps, p.closed)
    if name == "single_channel":
        return SingleChannelScheduler(config.n, config.m, config.utility, p.V, p.eta, p.eps, p.closed)
    if name == "ucb":
        return UcbScheduler(config.n, config.m, config.utility, p.V, p.delta)
    raise ValueError(f"unknown scheduler {name!r}")


def segment_optima(config: RunConfig) -> list[Optimum]:
    return [solve_p2_reference(q, config.utility) for _, q in config.schedule.segments]


def _run_one(config: RunConfig, name: str, seed: int) -> RunTrace:
    trace = simulate(make_scheduler(config, name), config.schedule, seed)
    trace.extra["params"] = {k: v for k, v in vars(config.params_for(name)).items() if v is not None}
    return trace


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return "%.9g" % x


def emit_csv(trace: RunTrace, path, spec, phi_star=(), stride: int = 100) -> Path:
    """Write one row per recorded slot (every ``stride``-th slot and the last).

    ``utility_running`` restarts at every segment; ``phi_star`` is the
    oracle value of the active segment (empty when not supplied). Pairs
    and users are 1-based; ``successes`` lists one 0/1 flag per pair.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    path = Path(path)
    T = trace.horizon
    util = trace.running_utility(spec) if T else np.zeros(0)
    seg = trace.segment_of()
    rows = [t for t in range(stride, T + 1, stride)]
    if T and (not rows or rows[-1] != T):
        rows.append(T)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for t in rows:
            k = t - 1
            users = np.nonzero(trace.channel[k] >= 0)[0]
            pairs = ";".join(f"{i + 1}-{trace.channel[k, i] + 1}" for i in users)
            hits = ";".join(str(int(trace.success[k, i])) for i in users)
            star = _fmt(phi_star[seg[k]]) if len(phi_star) else ""
            w.writerow((t, int(seg[k]) + 1, _fmt(util[k]), star, _fmt(trace.queue_max[k]), pairs, hits))
    return path


def read_csv(path) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def delivered_from_rows(rows: list[dict], n: int) -> np.ndarray:
    """Rebuild the T x n success matrix X from a raw (stride 1) trace CSV."""
    X = np.zeros((len(rows), n))
    for k, row in enumerate(rows):
        if int(row["t"]) != k + 1:
            raise ValueError("rows are not consecutive slots; write with stride 1")
        pairs = [p for p in row["assigned_pairs"].split(";") if p]
        hits = [h for h in row["successes"].split(";") if h]
        for p, h in zip(pairs, hits):
            X[k, int(p.split("-")[0]) - 1] = float(h)
    return X


def _sidecar(trace: RunTrace, path: Path, config: RunConfig, phi_star) -> None:
    meta = {
        "scheduler": trace.scheduler,
        "seed": trace.seed,
        "generator": trace.generator,
        "seed_streams": "SeedSequence(seed).spawn(2) -> (scheduler, environment)",
        "n": config.n,
        "m": config.m,
        "T": config.T,
        "segment_starts": list(trace.starts),
        "phi_star": [float(x) for x in phi_star],
        "utility": {"kind": config.utility.kind, "beta": config.utility.beta, "w1": config.utility.w1,
                    "w2": config.utility.w2, "weights": list(config.utility.weights)},
        "params": trace.extra.get("params", {}),
        "stride": 1 if config.raw else config.stride,
    }
    path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# experiment
# ---------------------------------------------------------------------------

@dataclass
class SummaryRow:
    scheduler: str
    seed: int | str
    segment: int
    start: int
    end: int
    final_utility: float
    phi_star: float

    @property
    def gap(self) -> float:
        return self.phi_star - self.final_utility

    def cells(self) -> list[str]:
        return [self.scheduler, str(self.seed), str(self.segment), str(self.start), str(self.end),
                _fmt(self.final_utility), _fmt(self.phi_star), _fmt(self.gap)]


@dataclass
class ExperimentResult:
    traces: dict[tuple[str, int], RunTrace]
    optima: list[Optimum]
    summary: list[SummaryRow]
    output_dir: Path | None = None

    def mean_gap(self, scheduler: str, segment: int) -> float:
        rows = [r for r in self.summary
                if r.scheduler == scheduler and r.segment == segment and r.seed == "mean"]
        return rows[0].gap


def summarize(traces: dict, schedule: SuccessSchedule, spec, optima) -> list[SummaryRow]:
    bounds = schedule.bounds()
    out = []
    names = list(dict.fromkeys(name for name, _ in traces))
    for name in names:
        finals = []
        for (nm, seed), trace in traces.items():
            if nm != name:
                continue
            f = trace.segment_final_utilities(spec)
            finals.append(f)
            for k, (a, b) in enumerate(bounds):
                out.append(SummaryRow(name, seed, k + 1, a, b, f[k], optima[k].phi_star))
        mean = np.mean(np.array(finals), axis=0)
        for k, (a, b) in enumerate(bounds):
            out.append(SummaryRow(name, "mean", k + 1, a, b, float(mean[k]), optima[k].phi_star))
    return out


def write_summary(rows: list[SummaryRow], path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for r in rows:
            w.writerow(r.cells())
    return path


def resolve_output_dir(config: RunConfig, override=None) -> Path:
    if override is not None:
        return Path(override)
    env = os.environ.get(OUTPUT_ENV)
    if env:
        return Path(env)
    return config.output_dir()


def run_experiment(config: RunConfig, output_dir=None, write: bool = True) -> ExperimentResult:
    """Run every (scheduler, seed) pair, then write traces and the summary.

    Output goes to ``output_dir``, else ``$FAIRMAC_OUTPUT_DIR``, else the
    config's ``output``. Seeds run in ``workers`` processes when asked.
    """
    optima = segment_optima(config)
    jobs = [(name, seed) for name in config.schedulers for seed in config.seeds]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = [pool.submit(_run_one, config, name, seed) for name, seed in jobs]
            results = [f.result() for f in futures]
    else:
        results = [_run_one(config, name, seed) for name, seed in jobs]
    traces = dict(zip(jobs, results))
    summary = summarize(traces, config.schedule, config.utility, optima)
    result = ExperimentResult(traces, optima, summary)
    if write:
        out = resolve_output_dir(config, output_dir)
        out.mkdir(parents=True, exist_ok=True)
        stars = [o.phi_star for o in optima]
        stride = 1 if config.raw else config.stride
        for (name, seed), trace in traces.items():
            stem = f"{name}_seed{seed}"
            emit_csv(trace, out / f"{stem}.csv", config.utility, stars, stride)
            _sidecar(trace, out / f"{stem}.json", config, stars)
        write_summary(summary, out / "summary.csv")
        result.output_dir = out
    return result
