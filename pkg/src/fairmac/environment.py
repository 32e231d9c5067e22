"""Bernoulli link-failure environment, offline optimum and run traces."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .assignment import Assignment, Feedback
from .utility import UtilitySpec, eval_phi, eval_phi_series, supergradient

ORACLE_MAX_S = 7
ORACLE_ITERS = 20_000


@dataclass(frozen=True)
class SuccessSchedule:
    """Piecewise-constant success probabilities over slots 1..horizon."""

    segments: tuple[tuple[int, np.ndarray], ...]
    horizon: int

    def __post_init__(self):
        if not self.segments:
            raise ValueError("schedule needs at least one segment")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        starts = [s for s, _ in self.segments]
        if starts[0] != 1:
            raise ValueError("first segment must start at slot 1")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("segment starts must be strictly increasing")
        if starts[-1] > self.horizon:
            raise ValueError(f"segment start {starts[-1]} beyond horizon {self.horizon}")
        shape = self.segments[0][1].shape
        for _, q in self.segments:
            if q.ndim != 2 or q.shape != shape:
                raise ValueError("all segment matrices must share one n x m shape")
            if np.any(q < 0) or np.any(q > 1) or not np.all(np.isfinite(q)):
                raise ValueError("success probabilities must lie in [0, 1]")

    @classmethod
    def build(cls, segments, horizon: int) -> "SuccessSchedule":
        segs = tuple((int(s), np.array(q, dtype=float)) for s, q in segments)
        return cls(segs, int(horizon))

    @classmethod
    def constant(cls, q, horizon: int) -> "SuccessSchedule":
        return cls.build([(1, q)], horizon)

    @property
    def shape(self) -> tuple[int, int]:
        return self.segments[0][1].shape

    @property
    def starts(self) -> list[int]:
        return [s for s, _ in self.segments]

    def bounds(self) -> list[tuple[int, int]]:
        """Inclusive (start, end) slot ranges of each segment."""
        st = self.starts
        return [(a, b - 1) for a, b in zip(st, st[1:] + [self.horizon + 1])]

    def segment_index(self, t: int) -> int:
        if not 1 <= t <= self.horizon:
            raise ValueError(f"slot {t} outside horizon [1, {self.horizon}]")
        idx = 0
        for k, (s, _) in enumerate(self.segments):
            if s <= t:
                idx = k
        return idx

    def q_at(self, t: int) -> np.ndarray:
        return self.segments[self.segment_index(t)][1]


def draw_feedback(schedule: SuccessSchedule, t: int, assignment: Assignment,
                  rng: np.random.Generator) -> Feedback:
    """Each assigned pair succeeds independently with its current probability."""
    q = schedule.q_at(t)
    u = rng.random(len(assignment.pairs))
    ok = tuple(bool(u[k] < q[i, j]) for k, (i, j) in enumerate(assignment.pairs))
    return Feedback(assignment, ok)


# ---------------------------------------------------------------------------
# offline optimum
# ---------------------------------------------------------------------------

def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, len(v) + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    return np.maximum(v - css[rho] / (rho + 1), 0.0)


def _mixture_ascent(A: np.ndarray, spec: UtilitySpec, iters: int):
    w = np.full(A.shape[1], 1.0 / A.shape[1])
    best_g = np.clip(A @ w, 0.0, 1.0)
    best_val, best_w = eval_phi(spec, best_g), w
    scale = None
    for k in range(iters):
        d = A.T @ supergradient(spec, np.clip(A @ w, 0.0, 1.0))
        norm = float(np.linalg.norm(d))
        if norm == 0.0:
            break
        if scale is None:
            scale = 1.0 / norm
        w = project_simplex(w + scale * d / math.sqrt(k + 1))
        gam = np.clip(A @ w, 0.0, 1.0)
        val = eval_phi(spec, gam)
        if val > best_val:
            best_val, best_g, best_w = val, gam, w
    return best_val, best_g, best_w


def _mixture_lp(A: np.ndarray, spec: UtilitySpec) -> np.ndarray:
    n, k = A.shape
    if spec.kind == "weighted_linear":
        res = linprog(-(np.asarray(spec.weights) @ A), A_eq=np.ones((1, k)), b_eq=[1.0],
                      bounds=[(0, None)] * k, method="highs")
        w = res.x
    else:
        # variables (w, c): max c  s.t.  c <= (A w)_i
        cost = np.zeros(k + 1)
        cost[-1] = -1.0
        A_ub = np.hstack([-A, np.ones((n, 1))])
        A_eq = np.append(np.ones(k), 0.0)[None, :]
        res = linprog(cost, A_ub=A_ub, b_ub=np.zeros(n), A_eq=A_eq, b_eq=[1.0],
                      bounds=[(0, None)] * k + [(None, None)], method="highs")
        w = res.x[:k]
    if not res.success:  # pragma: no cover
        raise RuntimeError(f"oracle LP failed: {res.message}")
    w = np.maximum(w, 0.0)
    return w / w.sum()


@dataclass(frozen=True)
class Optimum:
    phi_star: float
    P: np.ndarray
    gamma: np.ndarray


def solve_p2_reference(q, spec: UtilitySpec, iters: int = ORACLE_ITERS) -> Optimum:
    """Best static mixture of permutations for success matrix ``q``.

    Enumerates the s! permutations and writes the delivered rates as
    ``gamma = A w`` for mixture weights ``w`` on the simplex. Piecewise
    linear utilities give a linear program, solved exactly; the others are
    maximized by projected supergradient ascent, keeping the best iterate.
    """
    q = np.asarray(q, dtype=float)
    n, m = q.shape
    if spec.n != n:
        raise ValueError("utility dimension does not match q")
    s = max(n, m)
    if s > ORACLE_MAX_S:
        raise ValueError(f"oracle enumerates s! permutations; s={s} exceeds {ORACLE_MAX_S}")
    perms = list(itertools.permutations(range(s)))
    qp = np.zeros((s, s))
    qp[:n, :m] = q
    A = np.array([[qp[i, p[i]] for p in perms] for i in range(n)])
    if spec.kind in ("min", "weighted_linear"):
        best_w = _mixture_lp(A, spec)
        best_g = np.clip(A @ best_w, 0.0, 1.0)
        best_val = eval_phi(spec, best_g)
    else:
        best_val, best_g, best_w = _mixture_ascent(A, spec, iters)
    P = np.zeros((s, s))
    rows = np.arange(s)
    for wk, p in zip(best_w, perms):
        if wk > 0:
            P[rows, p] += wk
    return Optimum(best_val, P, best_g)


# ---------------------------------------------------------------------------
# traces
# ---------------------------------------------------------------------------

def running_average(X: np.ndarray, starts=None) -> np.ndarray:
    """Time average of X rows since slot 1, or since the active segment start."""
    X = np.asarray(X, dtype=float)
    T = X.shape[0]
    out = np.empty_like(X)
    starts = [1] if starts is None else list(starts)
    edges = [s - 1 for s in starts] + [T]
    for a, b in zip(edges, edges[1:]):
        if b <= a:
            continue
        c = np.cumsum(X[a:b], axis=0)
        out[a:b] = c / np.arange(1, b - a + 1)[:, None]
    return out


def running_utility(X: np.ndarray, spec: UtilitySpec, starts=None,
                    segment_reset: bool = True) -> np.ndarray:
    """phi of the running average of X; restarted at each segment when asked."""
    avg = running_average(X, starts if segment_reset else None)
    if len(avg) == 0:
        return np.zeros(0)
    return eval_phi_series(spec, avg)


@dataclass
class RunTrace:
    """Per-slot record of one run.

    ``channel[t-1, i]`` is the channel given to user i in slot t (-1 idle),
    ``X[t-1, i]`` its success indicator and ``queue_max[t-1]`` the largest
    virtual queue after the slot's update.
    """

    scheduler: str
    seed: int
    channel: np.ndarray
    success: np.ndarray
    queue_max: np.ndarray
    starts: list[int]
    generator: str = "PCG64"
    extra: dict = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return len(self.queue_max)

    @property
    def X(self) -> np.ndarray:
        return self.success.astype(float)

    def segment_of(self) -> np.ndarray:
        seg = np.zeros(self.horizon, dtype=np.int64)
        for k, s in enumerate(self.starts):
            seg[s - 1:] = k
        return seg

    def running_utility(self, spec: UtilitySpec, segment_reset: bool = True) -> np.ndarray:
        return running_utility(self.X, spec, self.starts, segment_reset)

    def segment_final_utilities(self, spec: UtilitySpec) -> list[float]:
        u = self.running_utility(spec, True)
        ends = [s - 1 for s in self.starts[1:]] + [self.horizon]
        return [float(u[e - 1]) for e in ends]


def seed_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent (scheduler, environment) generators derived from one seed."""
    a, b = np.random.SeedSequence(seed).spawn(2)
    return np.random.Generator(np.random.PCG64(a)), np.random.Generator(np.random.PCG64(b))


def simulate(scheduler, schedule: SuccessSchedule, seed: int, observer=None) -> RunTrace:
    """Run ``scheduler`` against ``schedule``; ``observer(t, scheduler, q)`` sees each slot first."""
    n, m = schedule.shape
    T = schedule.horizon
    sched_rng, env_rng = seed_streams(seed)
    channel = np.full((T, n), -1, dtype=np.int8)
    success = np.zeros((T, n), dtype=bool)
    qmax = np.zeros(T)
    for t in range(1, T + 1):
        if observer is not None:
            observer(t, scheduler, schedule.q_at(t))
        a = scheduler.decide(sched_rng)
        fb = draw_feedback(schedule, t, a, env_rng)
        for (i, j), hit in zip(a.pairs, fb.successes):
            channel[t - 1, i] = j
            success[t - 1, i] = hit
        scheduler.update(fb)
        qmax[t - 1] = float(np.max(scheduler.queues))
    return RunTrace(scheduler.name, seed, channel, success, qmax, schedule.starts)
