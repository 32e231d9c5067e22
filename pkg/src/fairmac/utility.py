"""Concave, entrywise nondecreasing utilities on [0, 1]^n.

Shipped kinds:

* ``log_prop``:        sum_i log(1 + beta x_i)            (proportional fairness)
* ``min``:             min_i x_i                          (max-min fairness)
* ``weighted_combo``:  w1 min_i x_i + w2 sum_i log(1 + beta x_i)
* ``weighted_linear``: sum_i w_i x_i                      (throughput)

:func:`solve_gamma` is the per-slot auxiliary-rate problem
``argmin_{g in [0,1]^n} -V phi(g) + <Q, g>``, solved exactly for every kind.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("log_prop", "min", "weighted_combo", "weighted_linear")
CLAMP_SLACK = 1e-9


@dataclass(frozen=True)
class UtilitySpec:
    kind: str
    n: int
    beta: float = 1.0
    w1: float = 0.0
    w2: float = 0.0
    weights: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown utility kind {self.kind!r}; expected one of {KINDS}")
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.beta < 0 or self.w1 < 0 or self.w2 < 0:
            raise ValueError("beta, w1 and w2 must be nonnegative")
        if self.kind == "weighted_linear":
            if len(self.weights) != self.n:
                raise ValueError(f"need {self.n} weights, got {len(self.weights)}")
            if any(w < 0 for w in self.weights):
                raise ValueError("weights must be nonnegative")

    @classmethod
    def log_prop(cls, n: int, beta: float = 1.0) -> "UtilitySpec":
        return cls("log_prop", n, beta=beta)

    @classmethod
    def minimum(cls, n: int) -> "UtilitySpec":
        return cls("min", n)

    @classmethod
    def weighted_combo(cls, n: int, w1: float, w2: float, beta: float) -> "UtilitySpec":
        return cls("weighted_combo", n, beta=beta, w1=w1, w2=w2)

    @classmethod
    def weighted_linear(cls, weights) -> "UtilitySpec":
        weights = tuple(float(w) for w in weights)
        return cls("weighted_linear", len(weights), weights=weights)


def _check_point(spec: UtilitySpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.n,):
        raise ValueError(f"expected a vector of length {spec.n}, got shape {x.shape}")
    if np.any(x < -CLAMP_SLACK) or np.any(x > 1 + CLAMP_SLACK):
        raise ValueError("utility argument outside [0, 1]^n")
    return np.clip(x, 0.0, 1.0)


def eval_phi(spec: UtilitySpec, x) -> float:
    x = _check_point(spec, x)
    k = spec.kind
    if k == "log_prop":
        return float(np.sum(np.log1p(spec.beta * x)))
    if k == "min":
        return float(x.min())
    if k == "weighted_combo":
        return float(spec.w1 * x.min() + spec.w2 * np.sum(np.log1p(spec.beta * x)))
    return float(np.dot(spec.weights, x))


def eval_phi_series(spec: UtilitySpec, xs: np.ndarray) -> np.ndarray:
    """``eval_phi`` applied to every row of ``xs``."""
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 2 or xs.shape[1] != spec.n:
        raise ValueError(f"expected rows of length {spec.n}")
    xs = np.clip(xs, 0.0, 1.0)
    k = spec.kind
    if k == "log_prop":
        return np.log1p(spec.beta * xs).sum(axis=1)
    if k == "min":
        return xs.min(axis=1)
    if k == "weighted_combo":
        return spec.w1 * xs.min(axis=1) + spec.w2 * np.log1p(spec.beta * xs).sum(axis=1)
    return xs @ np.asarray(spec.weights)


def supergradient(spec: UtilitySpec, x) -> np.ndarray:
    """A supergradient of phi at ``x``; for ``min`` the lowest coordinate (first on ties)."""
    x = _check_point(spec, x)
    k = spec.kind
    g = np.zeros(spec.n)
    if k in ("min", "weighted_combo"):
        g[int(np.argmin(x))] = 1.0 if k == "min" else spec.w1
    if k in ("log_prop", "weighted_combo"):
        w = 1.0 if k == "log_prop" else spec.w2
        g += w * spec.beta / (1 + spec.beta * x)
    if k == "weighted_linear":
        g = np.asarray(spec.weights, dtype=float).copy()
    return g


def subgradient_bound(spec: UtilitySpec) -> float:
    """Bound B on |d phi / d x_i| over [0, 1]^n."""
    k = spec.kind
    if k == "log_prop":
        return float(spec.beta)
    if k == "min":
        return 1.0
    if k == "weighted_combo":
        return float(spec.w1 + spec.w2 * spec.beta)
    return float(max(spec.weights))


def _log_coordinate(a: float, beta: float, Q: np.ndarray) -> np.ndarray:
    """Coordinatewise argmin over [0,1] of ``-a log(1 + beta g) + Q g``.

    A coordinate with ``Q = 0`` goes to 1 (the objective is nonincreasing in it).
    """
    g = np.zeros_like(Q)
    free = Q == 0
    g[free] = 1.0
    if a * beta > 0:
        busy = ~free
        g[busy] = np.clip(a / Q[busy] - 1.0 / beta, 0.0, 1.0)
    return g


def _min_level(weight: float, Q: np.ndarray) -> np.ndarray:
    # -weight*min(g) + <Q, g>: a common level, 1 when sum(Q) <= weight, else 0
    level = 1.0 if Q.sum() <= weight else 0.0
    return np.where(Q == 0, 1.0, level)


def _combo(a_min: float, a_log: float, beta: float, Q: np.ndarray) -> np.ndarray:
    """Exact minimizer of ``-a_min min(g) - a_log sum log(1+beta g) + <Q, g>``.

    For a floor level c the best point is ``max(c, g_i)`` with ``g_i`` the
    separable optimum; the resulting objective is convex in c with
    derivative ``-a_min + sum_{g_i < c} (Q_i - a_log beta / (1 + beta c))``,
    which is solved in closed form on each piece between breakpoints.
    """
    g = _log_coordinate(a_log, beta, Q)
    ab = a_log * beta

    def slope(c_lo: float, c: float) -> float:
        act = g <= c_lo
        return -a_min + float(np.sum(Q[act] - ab / (1 + beta * c)))

    if slope(0.0, 0.0) >= 0:
        return np.maximum(g, 0.0)
    knots = sorted(set(float(v) for v in g if 0 < v < 1)) + [1.0]
    lo = 0.0
    c_star = 1.0
    for hi in knots:
        if slope(lo, hi) >= 0:
            act = g <= lo
            k = int(act.sum())
            excess = float(Q[act].sum()) - a_min
            if k and excess > 0:
                c_star = min(max((k * ab / excess - 1) / beta, lo), hi)
            else:
                c_star = lo
            break
        lo = hi
    return np.maximum(g, c_star)


def solve_gamma(spec: UtilitySpec, Q, V: float) -> np.ndarray:
    """``argmin_{g in [0,1]^n} -V phi(g) + <Q, g>``.

    Any coordinate with ``Q_k > B V`` comes out exactly 0.
    """
    Q = np.asarray(Q, dtype=float)
    if Q.shape != (spec.n,):
        raise ValueError(f"expected a queue vector of length {spec.n}")
    if np.any(Q < 0):
        raise ValueError("queues must be nonnegative")
    if V <= 0:
        raise ValueError("V must be positive")
    k = spec.kind
    if k == "log_prop":
        return _log_coordinate(V, spec.beta, Q)
    if k == "min":
        return _min_level(V, Q)
    if k == "weighted_linear":
        w = V * np.asarray(spec.weights)
        return np.where(Q <= w, 1.0, 0.0)
    if spec.w1 == 0:
        return _log_coordinate(V * spec.w2, spec.beta, Q)
    if spec.w2 * spec.beta == 0:
        return _min_level(V * spec.w1, Q)
    return _combo(V * spec.w1, V * spec.w2, spec.beta, Q)
