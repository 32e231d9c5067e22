"""Adaptive mirror-descent scheduler and its single-channel form.

Each slot the scheduler rounds its iterate ``Ptilde`` onto the Birkhoff
polytope, samples a permutation from the Birkhoff-von Neumann mixture,
observes which transmissions succeeded and then

* picks auxiliary rates ``gamma = argmin -V phi(g) + <Q, g>``,
* takes a KL mirror step on ``Ptilde`` with the importance-weighted
  gradient ``eta * Q_i * S_ij * Y_ij / P_ij``, alternately projecting rows
  (odd slots) and columns (even slots) onto the floored simplex,
* updates the virtual queues ``Q <- [Q + gamma - X]_+``.

Because every quantity depends on the previous slot only through
``(Ptilde, Q)``, guarantees over a window do not depend on what the link
probabilities were before it.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .assignment import Assignment, Feedback
from .polytope import _kl_rows, _round_core, bvn_sample, kl_project_rows
from .utility import UtilitySpec, solve_gamma


def theorem1_params(T: int, s: int) -> tuple[float, float, float]:
    """Horizon-tuned ``(V, eta, eps)``: ``T^(1/3)``, ``1/T``, ``min(T^(-1/3), 0.9/s)``."""
    if T < 1:
        raise ValueError("T must be >= 1")
    root = float(np.cbrt(T))
    return root, 1.0 / T, min(1.0 / root, 0.9 / s)


def _check_params(V: float, eta: float, eps: float, s: int, closed: bool) -> None:
    if V <= 0 or eta <= 0:
        raise ValueError("V and eta must be positive")
    limit_ok = eps * s <= 1 if closed else eps * s < 1
    if eps <= 0 or not limit_ok:
        raise ValueError(f"eps must lie in (0, 1/s){' or equal 1/s' if closed else ''}; got eps={eps}, s={s}")


@dataclass
class AdaptiveState:
    n: int
    m: int
    utility: UtilitySpec
    V: float
    eta: float
    eps: float
    t: int
    Ptilde: np.ndarray
    kind: str  # stochasticity of Ptilde: "doubly" at t=1, then "row" / "col"
    Q: np.ndarray
    P: np.ndarray | None = None
    gamma: np.ndarray | None = None

    @property
    def s(self) -> int:
        return max(self.n, self.m)


def adaptive_init(n: int, m: int, utility: UtilitySpec, V: float, eta: float, eps: float,
                  closed: bool = False) -> AdaptiveState:
    """Uniform iterate and empty queues.

    ``closed`` admits ``eps == 1/s``, the degenerate fairness floor.
    """
    s = max(n, m)
    _check_params(V, eta, eps, s, closed)
    if utility.n != n:
        raise ValueError("utility dimension does not match n")
    return AdaptiveState(n, m, utility, float(V), float(eta), float(eps), 1,
                         np.full((s, s), 1.0 / s), "doubly", np.zeros(n))


def adaptive_decide(state: AdaptiveState, rng: np.random.Generator) -> Assignment:
    """Round, sample a permutation (one uniform draw) and truncate it to n x m."""
    _, _, P = _round_core(state.Ptilde)
    state.P = P
    perm = bvn_sample(P, rng.random(), check=False)
    return Assignment.from_permutation(perm, state.n, state.m)


def importance_estimate(feedback: Feedback, P: np.ndarray) -> np.ndarray:
    """``S_ij Y_ij / P_ij`` on [n] x [m]; zero on unassigned pairs."""
    a = feedback.assignment
    out = np.zeros((a.n, a.m))
    for (i, j), ok in zip(a.pairs, feedback.successes):
        if ok:
            if P[i, j] <= 0:
                raise ValueError("assigned pair has zero probability")
            out[i, j] = 1.0 / P[i, j]
    return out


def adaptive_update(state: AdaptiveState, feedback: Feedback) -> AdaptiveState:
    if state.P is None:
        raise RuntimeError("adaptive_update called before adaptive_decide")
    n, m, s = state.n, state.m, state.s
    S_hat = importance_estimate(feedback, state.P)
    gamma = solve_gamma(state.utility, state.Q, state.V)
    grad = np.zeros((s, s))
    grad[:n, :m] = state.eta * state.Q[:, None] * S_hat
    if state.t % 2 == 1:
        Pt = _kl_rows(grad, state.Ptilde, state.eps)
        kind = "row"
    else:
        Pt = _kl_rows(grad.T, state.Ptilde.T, state.eps).T
        kind = "col"
    Q = np.maximum(state.Q + gamma - feedback.delivered(), 0.0)
    return replace(state, t=state.t + 1, Ptilde=Pt, kind=kind, Q=Q, gamma=gamma)


# ---------------------------------------------------------------------------
# m = 1
# ---------------------------------------------------------------------------

@dataclass
class SingleChannelState:
    n: int
    utility: UtilitySpec
    V: float
    eta: float
    eps: float
    t: int
    p: np.ndarray
    Q: np.ndarray
    gamma: np.ndarray | None = None


def single_channel_init(n: int, m: int, utility: UtilitySpec, V: float, eta: float, eps: float,
                        closed: bool = False) -> SingleChannelState:
    if m != 1:
        raise ValueError(f"single-channel scheduler requires m = 1, got m = {m}")
    _check_params(V, eta, eps, n, closed)
    if utility.n != n:
        raise ValueError("utility dimension does not match n")
    return SingleChannelState(n, utility, float(V), float(eta), float(eps), 1,
                              np.full(n, 1.0 / n), np.zeros(n))


def single_channel_decide(state: SingleChannelState, rng: np.random.Generator) -> Assignment:
    cum = np.cumsum(state.p)
    user = min(int(np.searchsorted(cum, rng.random(), side="right")), state.n - 1)
    return Assignment(((user, 0),), state.n, 1)


def single_channel_update(state: SingleChannelState, feedback: Feedback) -> SingleChannelState:
    if feedback.assignment.m != 1:
        raise ValueError("single-channel update needs m = 1 feedback")
    S_hat = importance_estimate(feedback, state.p[:, None])[:, 0]
    gamma = solve_gamma(state.utility, state.Q, state.V)
    p = kl_project_rows(state.eta * state.Q * S_hat, state.p, state.eps)[0]
    Q = np.maximum(state.Q + gamma - feedback.delivered(), 0.0)
    return replace(state, t=state.t + 1, p=p, Q=Q, gamma=gamma)


# ---------------------------------------------------------------------------
# scheduler objects used by the simulator
# ---------------------------------------------------------------------------

class AdaptiveScheduler:
    name = "adaptive"

    def __init__(self, n, m, utility, V, eta, eps, closed=False):
        self.state = adaptive_init(n, m, utility, V, eta, eps, closed)

    def decide(self, rng: np.random.Generator) -> Assignment:
        return adaptive_decide(self.state, rng)

    def update(self, feedback: Feedback) -> None:
        self.state = adaptive_update(self.state, feedback)

    @property
    def queues(self) -> np.ndarray:
        return self.state.Q


class SingleChannelScheduler:
    name = "single_channel"

    def __init__(self, n, m, utility, V, eta, eps, closed=False):
        self.state = single_channel_init(n, m, utility, V, eta, eps, closed)

    def decide(self, rng: np.random.Generator) -> Assignment:
        return single_channel_decide(self.state, rng)

    def update(self, feedback: Feedback) -> None:
        self.state = single_channel_update(self.state, feedback)

    @property
    def queues(self) -> np.ndarray:
        return self.state.Q
