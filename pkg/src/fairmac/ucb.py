"""UCB max-weight scheduler.

After a deterministic prologue in which every user/channel pair is tried
once, each slot solves the auxiliary-rate problem for ``gamma`` and picks
the permutation maximizing ``sum_i Q_i * UCB_ij`` (Hungarian method). The
schedule is a deterministic function of the observed history, so every
user can recompute it independently from shared feedback.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assignment import Assignment, Feedback
from .polytope import max_weight_matching
from .utility import UtilitySpec, solve_gamma


@dataclass
class UcbStats:
    n_obs: np.ndarray  # int counts per pair
    n_succ: np.ndarray
    t: int = 0  # slots observed so far

    @classmethod
    def empty(cls, n: int, m: int) -> "UcbStats":
        return cls(np.zeros((n, m), dtype=np.int64), np.zeros((n, m), dtype=np.int64))

    @property
    def s_hat(self) -> np.ndarray:
        """Empirical success rates; 0 for pairs never tried."""
        return np.divide(self.n_succ, self.n_obs, out=np.zeros(self.n_obs.shape),
                         where=self.n_obs > 0)

    def record(self, feedback: Feedback) -> None:
        for (i, j), ok in zip(feedback.assignment.pairs, feedback.successes):
            self.n_obs[i, j] += 1
            self.n_succ[i, j] += int(ok)
        self.t += 1


def delta_schedule(t: int, constant: float | None = None) -> float:
    """Confidence level ``1/t``, or a fixed ``constant`` when given."""
    if constant is not None:
        return float(constant)
    return 1.0 / t


def confidence_radius(stats: UcbStats, delta: float) -> np.ndarray:
    if delta <= 0:
        raise ValueError("delta must be positive")
    n = stats.n_obs.astype(float)
    if np.any(n < 1):
        raise ValueError("every pair needs at least one observation")
    return np.sqrt(np.log(n * (n + 1) / delta) / (2 * n))


def ucb_index(stats: UcbStats, delta: float) -> np.ndarray:
    return stats.s_hat + confidence_radius(stats, delta)


def good_event(stats: UcbStats, delta: float, q) -> bool:
    """Whether every ``q_ij`` lies in ``[UCB - 2f, UCB]``."""
    f = confidence_radius(stats, delta)
    u = stats.s_hat + f
    q = np.asarray(q, dtype=float)
    return bool(np.all((u - 2 * f <= q) & (q <= u)))


def exploration_assignment(t: int, n: int, m: int) -> Assignment:
    """Cyclic prologue: in slot t (1-based) channel j goes to user (t-1+j) mod s."""
    s = max(n, m)
    if not 1 <= t <= s:
        raise ValueError(f"prologue slot {t} outside [1, {s}]")
    pairs = []
    for j in range(m):
        i = (t - 1 + j) % s
        if i < n:
            pairs.append((i, j))
    return Assignment(tuple(pairs), n, m)


@dataclass
class UcbState:
    n: int
    m: int
    utility: UtilitySpec
    V: float
    delta_const: float | None
    stats: UcbStats
    Q: np.ndarray
    gamma: np.ndarray | None = None

    @property
    def s(self) -> int:
        return max(self.n, self.m)

    @property
    def t(self) -> int:
        """The slot about to be scheduled (1-based)."""
        return self.stats.t + 1


def ucb_init(n: int, m: int, utility: UtilitySpec, V: float, delta: float | None = None) -> UcbState:
    if V <= 0:
        raise ValueError("V must be positive")
    if delta is not None and delta <= 0:
        raise ValueError("delta must be positive")
    if utility.n != n:
        raise ValueError("utility dimension does not match n")
    return UcbState(n, m, utility, float(V), delta, UcbStats.empty(n, m), np.zeros(n))


def ucb_weights(state: UcbState) -> np.ndarray:
    """``Q_i * UCB_ij(t-1)`` padded with zeros to s x s."""
    t, s = state.t, state.s
    idx = ucb_index(state.stats, delta_schedule(t - 1, state.delta_const))
    W = np.zeros((s, s))
    W[:state.n, :state.m] = state.Q[:, None] * idx
    return W


def ucb_decide(state: UcbState) -> Assignment:
    t = state.t
    if t <= state.s:
        state.gamma = None
        return exploration_assignment(t, state.n, state.m)
    state.gamma = solve_gamma(state.utility, state.Q, state.V)
    perm = max_weight_matching(ucb_weights(state))
    return Assignment.from_permutation(perm, state.n, state.m)


def ucb_update(state: UcbState, feedback: Feedback) -> UcbState:
    if state.gamma is not None:
        state.Q = np.maximum(state.Q + state.gamma - feedback.delivered(), 0.0)
    state.stats.record(feedback)
    return state


def ucb_step(state: UcbState, respond) -> tuple[Assignment, UcbState]:
    """One full slot: decide, obtain feedback via ``respond(assignment)``, update."""
    a = ucb_decide(state)
    return a, ucb_update(state, respond(a))


class UcbScheduler:
    name = "ucb"

    def __init__(self, n, m, utility, V, delta=None):
        self.state = ucb_init(n, m, utility, V, delta)

    def decide(self, rng=None) -> Assignment:
        return ucb_decide(self.state)

    def update(self, feedback: Feedback) -> None:
        self.state = ucb_update(self.state, feedback)

    @property
    def queues(self) -> np.ndarray:
        return self.state.Q
