"""Run configuration: a line-oriented ``key = value`` format with sections.

Example::

    [run]
    scheduler = adaptive, ucb     # adaptive | single_channel | ucb, comma separated
    n = 5
    m = 3
    T = 100000
    seeds = 1, 2, 3
    output = results/scenario1
    stride = 100                  # keep every 100th slot in the CSV
    raw = false                   # true keeps every slot
    workers = 1

    [utility]
    kind = log_prop               # log_prop | min | weighted_combo | weighted_linear
    beta = 1

    [params]                      # all optional
    V = 20
    eta = 1e-5
    epsilon = 0.02
    delta = 1/t                   # or a positive constant
    fairness_floor = 0.05         # overrides epsilon, may equal 1/s

    [segment]
    start = 1
    q = [[0.9, 0.2, 0.1], ...]

    [segment]
    start_fraction = 0.5          # first slot after T/2
    q = ...

Instead of inline ``[segment]`` sections a ``[schedule]`` section may name
``file = other.cfg`` (segments read from that file, relative to this one)
or ``preset = 1`` (a shipped scenario).
Blank lines and ``#`` comments are ignored.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .adaptive import theorem1_params
from .environment import SuccessSchedule
from .utility import KINDS, UtilitySpec

SCHEDULERS = ("adaptive", "single_channel", "ucb")
SCENARIO_DIR = Path(__file__).parent / "scenarios"

_KEYS = {
    "run": {"scheduler", "n", "m", "T", "seeds", "output", "stride", "raw", "workers"},
    "utility": {"kind", "beta", "w1", "w2", "weights"},
    "params": {"V", "eta", "epsilon", "delta", "fairness_floor"},
    "schedule": {"file", "preset"},
    "segment": {"start", "start_fraction", "q"},
}


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        where = ""
        if source:
            where = f"{source}:"
        if line is not None:
            where += f"line {line}: "
        elif where:
            where += " "
        super().__init__(where + message)
        self.line = line


@dataclass(frozen=True)
class SchedulerParams:
    """Resolved parameters for one scheduler."""

    V: float
    eta: float | None = None
    eps: float | None = None
    delta: float | None = None  # None means 1/t
    closed: bool = False  # eps == 1/s allowed (fairness floor)


@dataclass
class RunConfig:
    schedulers: tuple[str, ...]
    n: int
    m: int
    T: int
    utility: UtilitySpec
    schedule: SuccessSchedule
    seeds: tuple[int, ...] = (1,)
    output: str = "results"
    stride: int = 100
    raw: bool = False
    workers: int = 1
    V: float | None = None
    eta: float | None = None
    epsilon: float | None = None
    delta: float | None = None
    fairness_floor: float | None = None
    base_dir: Path = field(default_factory=Path.cwd)

    @property
    def s(self) -> int:
        return max(self.n, self.m)

    def params_for(self, scheduler: str) -> SchedulerParams:
        if scheduler == "ucb":
            V = self.V if self.V is not None else math.sqrt(self.T)
            return SchedulerParams(V=V, delta=self.delta)
        s = self.s if scheduler == "adaptive" else self.n
        V0, eta0, eps0 = theorem1_params(self.T, s)
        eps = eps0 if self.epsilon is None else self.epsilon
        closed = False
        if self.fairness_floor is not None:
            eps, closed = self.fairness_floor, True
        return SchedulerParams(V=V0 if self.V is None else self.V,
                               eta=eta0 if self.eta is None else self.eta,
                               eps=eps, closed=closed)

    def output_dir(self) -> Path:
        out = Path(self.output)
        return out if out.is_absolute() else self.base_dir / out


# ---------------------------------------------------------------------------
# lexical layer
# ---------------------------------------------------------------------------

def _sections(text: str, source: str | None):
    """Yield (section, {key: (value, line)}, header_line) blocks in order."""
    current, header, entries = None, 0, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {raw.strip()!r}", lineno, source)
            if current is not None:
                yield current, entries, header
            current, header, entries = line[1:-1].strip(), lineno, {}
            if current not in _KEYS:
                raise ConfigError(f"unknown section [{current}]", lineno, source)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno, source)
        if current is None:
            raise ConfigError("key outside of any section", lineno, source)
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in _KEYS[current]:
            raise ConfigError(f"unknown key {key!r} in [{current}]", lineno, source)
        if key in entries:
            raise ConfigError(f"duplicate key {key!r} in [{current}]", lineno, source)
        entries[key] = (value, lineno)
    if current is not None:
        yield current, entries, header


def _int(value: str, line: int, source, key: str, low: int = 1) -> int:
    try:
        x = int(value)
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {value!r}", line, source) from None
    if x < low:
        raise ConfigError(f"{key} must be >= {low}", line, source)
    return x


def _float(value: str, line: int, source, key: str) -> float:
    try:
        x = float(value)
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {value!r}", line, source) from None
    if not math.isfinite(x):
        raise ConfigError(f"{key} must be finite", line, source)
    return x


def _bool(value: str, line: int, source, key: str) -> bool:
    v = value.lower()
    if v in ("true", "yes", "1", "on"):
        return True
    if v in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"{key} must be true or false, got {value!r}", line, source)


def _list(value: str) -> list[str]:
    return [p.strip() for p in value.split(",") if p.strip()]


def parse_matrix(value: str, line: int | None = None, source=None) -> np.ndarray:
    """A nested-list literal ``[[a, b], [c, d]]`` with equal-length rows."""
    try:
        obj = ast.literal_eval(value)
    except (ValueError, SyntaxError):
        raise ConfigError(f"malformed matrix literal {value!r}", line, source) from None
    if (not isinstance(obj, (list, tuple)) or not obj
            or not all(isinstance(r, (list, tuple)) and r for r in obj)):
        raise ConfigError("matrix literal must be a non-empty list of non-empty rows", line, source)
    if len({len(r) for r in obj}) != 1:
        raise ConfigError("matrix rows have different lengths", line, source)
    try:
        q = np.array(obj, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError("matrix entries must be numbers", line, source) from None
    if not np.all(np.isfinite(q)):
        raise ConfigError("matrix entries must be finite", line, source)
    return q


# ---------------------------------------------------------------------------
# segments
# ---------------------------------------------------------------------------

def _segments(blocks, T: int, source) -> list[tuple[int, np.ndarray, int]]:
    out = []
    for entries, header in blocks:
        if "q" not in entries:
            raise ConfigError("[segment] needs a q matrix", header, source)
        if "start" in entries and "start_fraction" in entries:
            raise ConfigError("give start or start_fraction, not both", entries["start"][1], source)
        if "start" in entries:
            v, ln = entries["start"]
            start = _int(v, ln, source, "start")
        elif "start_fraction" in entries:
            v, ln = entries["start_fraction"]
            f = _float(v, ln, source, "start_fraction")
            if not 0 <= f < 1:
                raise ConfigError("start_fraction must lie in [0, 1)", ln, source)
            start = int(math.floor(f * T)) + 1
        else:
            start, ln = 1, header
        v, qln = entries["q"]
        q = parse_matrix(v, qln, source)
        if np.any(q < 0) or np.any(q > 1):
            raise ConfigError("success probabilities must lie in [0, 1]", qln, source)
        out.append((start, q, qln))
    return out


def _segment_blocks(text: str, source) -> list:
    return [(e, h) for name, e, h in _sections(text, source) if name == "segment"]


def preset_path(name: str) -> Path:
    key = name.removeprefix("scenario")
    path = SCENARIO_DIR / f"scenario{key}.cfg"
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(list_presets())}")
    return path


def list_presets() -> list[str]:
    return sorted(p.stem for p in SCENARIO_DIR.glob("scenario*.cfg"))


# ---------------------------------------------------------------------------
# semantic layer
# ---------------------------------------------------------------------------

def parse_config(text: str, source: str | None = None, base_dir: Path | None = None) -> RunConfig:
    """Parse and validate a run configuration; errors carry line numbers."""
    base_dir = Path.cwd() if base_dir is None else Path(base_dir)
    singles: dict[str, tuple[dict, int]] = {}
    seg_blocks = []
    for name, entries, header in _sections(text, source):
        if name == "segment":
            seg_blocks.append((entries, header))
        elif name in singles:
            raise ConfigError(f"section [{name}] appears twice", header, source)
        else:
            singles[name] = (entries, header)

    run, run_line = singles.get("run", ({}, None))
    for key in ("scheduler", "n", "m", "T"):
        if key not in run:
            raise ConfigError(f"[run] is missing {key!r}", run_line, source)

    def line_of(sec, key):
        return singles.get(sec, ({}, None))[0].get(key, (None, None))[1]

    v, ln = run["scheduler"]
    schedulers = tuple(_list(v))
    if not schedulers:
        raise ConfigError("scheduler list is empty", ln, source)
    for sname in schedulers:
        if sname not in SCHEDULERS:
            raise ConfigError(f"unknown scheduler {sname!r}; expected one of {SCHEDULERS}", ln, source)
    if len(set(schedulers)) != len(schedulers):
        raise ConfigError("scheduler listed twice", ln, source)
    n = _int(*run["n"], source, "n")
    m = _int(*run["m"], source, "m")
    T = _int(*run["T"], source, "T")
    s = max(n, m)
    if "single_channel" in schedulers and m != 1:
        raise ConfigError("single_channel requires m = 1", run["scheduler"][1], source)

    kw = {}
    if "seeds" in run:
        v, ln = run["seeds"]
        seeds = tuple(_int(x, ln, source, "seed", low=0) for x in _list(v))
        if not seeds:
            raise ConfigError("seeds list is empty", ln, source)
        if len(set(seeds)) != len(seeds):
            raise ConfigError("seed listed twice", ln, source)
        kw["seeds"] = seeds
    if "output" in run:
        kw["output"] = run["output"][0]
    if "stride" in run:
        kw["stride"] = _int(*run["stride"], source, "stride")
    if "raw" in run:
        kw["raw"] = _bool(*run["raw"], source, "raw")
    if "workers" in run:
        kw["workers"] = _int(*run["workers"], source, "workers")

    utility = _utility(singles.get("utility"), n, source)

    params, _ = singles.get("params", ({}, None))
    for key in ("V", "eta", "epsilon", "fairness_floor"):
        if key in params:
            v, ln = params[key]
            x = _float(v, ln, source, key)
            if x <= 0:
                raise ConfigError(f"{key} must be positive", ln, source)
            kw[key] = x
    if "epsilon" in kw and kw["epsilon"] * s >= 1:
        raise ConfigError(f"infeasible epsilon = {kw['epsilon']}: ε ≥ 1/s with s = {s}",
                          line_of("params", "epsilon"), source)
    if "fairness_floor" in kw and kw["fairness_floor"] * s > 1 + 1e-12:
        raise ConfigError(f"infeasible fairness_floor = {kw['fairness_floor']}: θ > 1/s with s = {s}",
                          line_of("params", "fairness_floor"), source)
    if "delta" in params:
        v, ln = params["delta"]
        if v.replace(" ", "") != "1/t":
            d = _float(v, ln, source, "delta")
            if d <= 0:
                raise ConfigError("delta must be positive or '1/t'", ln, source)
            kw["delta"] = d

    schedule = _schedule(singles.get("schedule"), seg_blocks, T, base_dir, source)
    if schedule.shape != (n, m):
        raise ConfigError(f"q matrices are {schedule.shape[0]}x{schedule.shape[1]} but n x m = {n}x{m}",
                          None, source)
    return RunConfig(schedulers, n, m, T, utility, schedule, base_dir=base_dir, **kw)


def _utility(block, n: int, source) -> UtilitySpec:
    if block is None:
        raise ConfigError("missing [utility] section", None, source)
    entries, header = block
    if "kind" not in entries:
        raise ConfigError("[utility] is missing 'kind'", header, source)
    kind, kline = entries["kind"]
    if kind not in KINDS:
        raise ConfigError(f"unknown utility kind {kind!r}; expected one of {KINDS}", kline, source)
    vals = {}
    for key in ("beta", "w1", "w2"):
        if key in entries:
            v, ln = entries[key]
            x = _float(v, ln, source, key)
            if x < 0:
                raise ConfigError(f"{key} must be nonnegative", ln, source)
            vals[key] = x
    if kind == "weighted_linear":
        if "weights" in entries:
            v, ln = entries["weights"]
            w = tuple(_float(x, ln, source, "weights") for x in _list(v))
            if len(w) != n:
                raise ConfigError(f"need {n} weights, got {len(w)}", ln, source)
            if any(x < 0 for x in w):
                raise ConfigError("weights must be nonnegative", ln, source)
        else:
            w = (1.0,) * n
        return UtilitySpec.weighted_linear(w)
    if kind == "log_prop":
        return UtilitySpec.log_prop(n, vals.get("beta", 1.0))
    if kind == "min":
        return UtilitySpec.minimum(n)
    return UtilitySpec.weighted_combo(n, vals.get("w1", 1.0), vals.get("w2", 1.0), vals.get("beta", 1.0))


def _schedule(block, seg_blocks, T: int, base_dir: Path, source) -> SuccessSchedule:
    if block is not None:
        entries, header = block
        if seg_blocks:
            raise ConfigError("use either [schedule] or [segment] sections, not both", header, source)
        if len(entries) != 1:
            raise ConfigError("[schedule] takes exactly one of 'file' or 'preset'", header, source)
        (key, (value, ln)), = entries.items()
        if key == "preset":
            path = preset_path(value)
        else:
            path = Path(value)
            path = path if path.is_absolute() else base_dir / path
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read schedule file {str(path)!r}: {exc.strerror}", ln, source) from None
        segs = _segments(_segment_blocks(text, str(path)), T, str(path))
        src = str(path)
    else:
        segs = _segments(seg_blocks, T, source)
        src = source
    if not segs:
        raise ConfigError("no [segment] sections given", None, source)
    segs.sort(key=lambda x: x[0])
    if segs[0][0] != 1:
        raise ConfigError("the first segment must start at slot 1", segs[0][2], src)
    for (a, qa, _), (b, qb, lb) in zip(segs, segs[1:]):
        if a == b:
            raise ConfigError(f"two segments start at slot {b}", lb, src)
        if qb.shape != qa.shape:
            raise ConfigError("all q matrices must have the same shape", lb, src)
    if segs[-1][0] > T:
        raise ConfigError(f"segment start {segs[-1][0]} is beyond T = {T}", segs[-1][2], src)
    return SuccessSchedule.build([(a, q) for a, q, _ in segs], T)


def load_config(path) -> RunConfig:
    """Read a config from ``path``, or a shipped preset given as ``scenarioN``."""
    p = Path(path)
    base = p.parent
    if not p.exists() and not p.suffix:
        p, base = preset_path(str(path)), Path.cwd()
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {str(p)!r}: {exc.strerror}") from None
    return parse_config(text, source=str(p), base_dir=base)
