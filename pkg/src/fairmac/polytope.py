"""Matrix geometry on the Birkhoff polytope.

Rounding of row/column stochastic matrices onto doubly stochastic ones,
Birkhoff-von Neumann decomposition and sampling, KL projection onto a
floored simplex and max-weight bipartite matching (Hungarian method).

Permutations are stored as tuples ``perm`` with ``perm[i]`` the column
matched to row ``i``. All indices are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

SUM_TOL = 1e-9
FLOOR_TOL = 1e-12
ZERO_TOL = 1e-12

KINDS = ("row", "col", "doubly", "general")

Permutation = tuple[int, ...]


@dataclass(frozen=True)
class StochMatrix:
    """Square nonnegative matrix tagged with the stochasticity it claims.

    ``floor`` is the entrywise lower bound the tag promises.
    """

    entries: np.ndarray
    kind: str = "general"
    floor: float = 0.0

    def validate(self) -> "StochMatrix":
        a = self.entries
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")
        if not np.all(np.isfinite(a)) or np.any(a < 0):
            raise ValueError("entries must be finite and nonnegative")
        if self.kind in ("row", "doubly") and np.any(np.abs(a.sum(axis=1) - 1) > SUM_TOL):
            raise ValueError("rows do not sum to 1")
        if self.kind in ("col", "doubly") and np.any(np.abs(a.sum(axis=0) - 1) > SUM_TOL):
            raise ValueError("columns do not sum to 1")
        if a.size and a.min() < self.floor - FLOOR_TOL:
            raise ValueError(f"entry below floor {self.floor}")
        return self

    @property
    def size(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class BvnDecomposition:
    """Convex combination ``sum_l weights[l] * M(permutations[l])``."""

    weights: np.ndarray
    permutations: tuple[Permutation, ...]

    def __post_init__(self):
        if len(self.weights) != len(self.permutations) or len(self.weights) == 0:
            raise ValueError("decomposition needs matching, nonempty weights and permutations")
        if np.any(self.weights <= 0):
            raise ValueError("weights must be positive")
        if abs(float(np.sum(self.weights)) - 1.0) > SUM_TOL:
            raise ValueError("weights must sum to 1")

    def __len__(self) -> int:
        return len(self.weights)

    def reconstruct(self) -> np.ndarray:
        s = len(self.permutations[0])
        out = np.zeros((s, s))
        rows = np.arange(s)
        for w, perm in zip(self.weights, self.permutations):
            out[rows, perm] += w
        return out


def permutation_matrix(perm: Sequence[int]) -> np.ndarray:
    s = len(perm)
    out = np.zeros((s, s))
    out[np.arange(s), list(perm)] = 1.0
    return out


def _as_checked_matrix(P) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {P.shape}")
    if not np.all(np.isfinite(P)):
        raise ValueError("matrix has non-finite entries")
    if np.any(P < 0):
        raise ValueError("matrix has negative entries")
    return P


# ---------------------------------------------------------------------------
# ROUND
# ---------------------------------------------------------------------------

def round_stages(P) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return the row-normalized, column-normalized and final matrices.

    Rows (then columns) with sum above 1 are scaled down to sum 1; the
    remaining row and column deficits are filled by a rank-one correction
    ``r c^T / ||r||_1``.
    """
    return _round_core(_as_checked_matrix(P))


def _round_core(P: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rs = P.sum(axis=1)
    P1 = np.where((rs > 1)[:, None], P / np.where(rs > 1, rs, 1.0)[:, None], P)
    cs = P1.sum(axis=0)
    P2 = np.where((cs > 1)[None, :], P1 / np.where(cs > 1, cs, 1.0)[None, :], P1)
    r = 1.0 - P2.sum(axis=1)
    c = 1.0 - P2.sum(axis=0)
    C = float(np.abs(r).sum())
    if C == 0.0:
        return P1, P2, P2
    return P1, P2, P2 + np.outer(r, c) / C


def round_to_birkhoff(P, eps: float = 0.0) -> StochMatrix:
    """Map a nonnegative square matrix into the Birkhoff polytope.

    For inputs that are row- or column-stochastic with entries >= ``eps``
    the output entries are >= ``eps / s``; pass ``eps`` to record that
    floor on the returned matrix.
    """
    _, _, out = round_stages(P)
    return StochMatrix(out, "doubly", eps / out.shape[0])


# ---------------------------------------------------------------------------
# Birkhoff-von Neumann
# ---------------------------------------------------------------------------

def _augment(u, adj, match_col, seen) -> bool:
    for v in adj[u]:
        if v in seen:
            continue
        seen.add(v)
        w = match_col[v]
        if w < 0 or _augment(w, adj, match_col, seen):
            match_col[v] = u
            return True
    return False


def _perfect_matching(adj: list[list[int]], s: int, start: list[int] | None = None) -> list[int] | None:
    """Kuhn's augmenting-path matching; ``start`` is a partial row->col warm start."""
    match_col = [-1] * s
    if start is not None:
        for i, j in enumerate(start):
            if j >= 0:
                match_col[j] = i
    matched = set(x for x in match_col if x >= 0)
    for u in range(s):
        if u in matched:
            continue
        if not _augment(u, adj, match_col, set()):
            return None
    row = [-1] * s
    for j, i in enumerate(match_col):
        row[i] = j
    return row


def _bvn_terms(P: np.ndarray):
    """Yield (weight, perm) of the greedy decomposition of ``P``."""
    s = P.shape[0]
    work = [list(map(float, r)) for r in P]
    match: list[int] | None = None
    while True:
        adj = [[j for j in range(s) if work[i][j] > ZERO_TOL] for i in range(s)]
        if not all(adj):
            return
        start = None
        if match is not None:
            start = [j if work[i][j] > ZERO_TOL else -1 for i, j in enumerate(match)]
        match = _perfect_matching(adj, s, start)
        if match is None:
            return
        w = min(work[i][match[i]] for i in range(s))
        for i in range(s):
            j = match[i]
            v = work[i][j] - w
            work[i][j] = v if v > ZERO_TOL else 0.0
        yield w, tuple(match)


def _check_doubly(P) -> np.ndarray:
    P = np.asarray(P.entries if isinstance(P, StochMatrix) else P, dtype=float)
    P = _as_checked_matrix(np.where((P < 0) & (P > -FLOOR_TOL), 0.0, P))
    if np.any(np.abs(P.sum(axis=1) - 1) > SUM_TOL) or np.any(np.abs(P.sum(axis=0) - 1) > SUM_TOL):
        raise ValueError("matrix is not doubly stochastic within tolerance")
    return P


def bvn_decompose(P) -> BvnDecomposition:
    """Greedy Birkhoff-von Neumann decomposition of a doubly stochastic matrix.

    Repeatedly finds a perfect matching on the positive entries, peels off
    the smallest matched entry and zeroes residues below 1e-12. Each step
    drops the dimension of the smallest face containing the residual, so at
    most ``s^2 - 2s + 2`` terms are produced.
    """
    P = _check_doubly(P)
    terms = list(_bvn_terms(P))
    weights = np.array([w for w, _ in terms])
    return BvnDecomposition(weights, tuple(p for _, p in terms))


def sample_permutation(d: BvnDecomposition, rng: np.random.Generator) -> int:
    """Index ``l`` drawn with probability ``d.weights[l]`` (one uniform draw)."""
    return _pick(np.cumsum(d.weights), rng.random())


def _pick(cum: np.ndarray, u: float) -> int:
    return min(int(np.searchsorted(cum, u, side="right")), len(cum) - 1)


def bvn_sample(P, u: float, check: bool = True) -> Permutation:
    """Permutation that ``sample_permutation`` would return for uniform ``u``.

    Walks the same greedy decomposition as ``bvn_decompose`` but stops as
    soon as the cumulative weight passes ``u``.
    """
    if check:
        P = _check_doubly(P)
    acc = 0.0
    last = None
    for w, perm in _bvn_terms(P):
        acc += w
        last = perm
        if acc > u:
            return perm
    if last is None:
        raise ValueError("empty decomposition")
    return last


# ---------------------------------------------------------------------------
# KL projection onto the floored simplex
# ---------------------------------------------------------------------------

def kl_project_rows(X, Y, eps: float) -> np.ndarray:
    """Row-wise ``argmin_{p in Delta_eps} -<x, p> + KL(p || y)``.

    With ``z = y * exp(x)`` sorted ascending, the minimizer floors the
    ``k`` smallest coordinates at ``eps`` and spreads ``1 - k*eps`` over the
    rest in proportion to ``z``; ``k`` is the smallest count for which every
    free coordinate clears the floor. ``y`` need not be normalized.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape != Y.shape:
        raise ValueError(f"shape mismatch {X.shape} vs {Y.shape}")
    rows, l = X.shape
    if eps < 0 or eps * l > 1 + 1e-12:
        raise ValueError(f"infeasible floor eps={eps} for dimension {l}")
    if not np.all(np.isfinite(X)):
        raise ValueError("x must be finite")
    if np.any(Y <= 0) or not np.all(np.isfinite(Y)):
        raise ValueError("y entries must be positive and finite")
    return _kl_rows(X, Y, eps)


def _kl_rows(X: np.ndarray, Y: np.ndarray, eps: float) -> np.ndarray:
    rows, l = X.shape
    logz = np.log(Y) + X
    order = np.argsort(logz, axis=1, kind="stable")
    ls = np.take_along_axis(logz, order, axis=1)
    zs = np.exp(ls - ls[:, -1:])
    suffix = np.cumsum(zs[:, ::-1], axis=1)[:, ::-1]
    k = np.arange(l)
    ok = zs / suffix * (1 - eps * k) >= eps
    first = np.argmax(ok, axis=1)
    r = np.arange(rows)
    scale = (1 - eps * first) / suffix[r, first]
    ps = np.where(k[None, :] < first[:, None], eps, zs * scale[:, None])
    out = np.empty_like(ps)
    np.put_along_axis(out, order, ps, axis=1)
    return out


def kl_project(x, y, eps: float) -> np.ndarray:
    """Single-vector form of :func:`kl_project_rows`."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or y.shape != x.shape:
        raise ValueError("x and y must be vectors of equal length")
    return kl_project_rows(x[None, :], y[None, :], eps)[0]


def matrix_divergence(X, Y) -> float:
    """``sum X log(X/Y)`` with the convention ``0 log 0 = 0``."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    mask = X > 0
    return float(np.sum(X[mask] * np.log(X[mask] / Y[mask])))


# ---------------------------------------------------------------------------
# Max-weight matching
# ---------------------------------------------------------------------------

def _hungarian_min(C: list[list[float]]) -> tuple[list[int], list[float], list[float]]:
    """O(s^3) shortest augmenting path Hungarian method for min-cost.

    Returns (row->col assignment, row potentials, col potentials) with
    ``C[i][j] - u[i] - v[j] >= 0`` and equality on the assignment.
    """
    s = len(C)
    INF = float("inf")
    u = [0.0] * (s + 1)
    v = [0.0] * (s + 1)
    p = [0] * (s + 1)  # p[j]: row (1-based) matched to col j; col 0 is a sentinel
    way = [0] * (s + 1)
    for i in range(1, s + 1):
        p[0] = i
        j0 = 0
        minv = [INF] * (s + 1)
        used = [False] * (s + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = INF
            j1 = 0
            row = C[i0 - 1]
            ui0 = u[i0]
            for j in range(1, s + 1):
                if not used[j]:
                    cur = row[j - 1] - ui0 - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(s + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    assign = [0] * s
    for j in range(1, s + 1):
        assign[p[j] - 1] = j - 1
    return assign, u[1:], v[1:]


def _lex_smallest_perfect(adj: list[list[int]], s: int) -> list[int]:
    fixed: list[int] = []
    used: set[int] = set()
    for i in range(s):
        for j in adj[i]:
            if j in used:
                continue
            rest = [[c for c in adj[r] if c not in used and c != j] for r in range(i + 1, s)]
            if _has_perfect(rest, s):
                fixed.append(j)
                used.add(j)
                break
        else:  # pragma: no cover - the optimal assignment is always available
            raise RuntimeError("tight graph lost its perfect matching")
    return fixed


def _has_perfect(adj: list[list[int]], s: int) -> bool:
    match_col = [-1] * s
    for u in range(len(adj)):
        if not _augment(u, adj, match_col, set()):
            return False
    return True


def max_weight_matching(W) -> Permutation:
    """Permutation maximizing ``sum_i W[i, perm[i]]``.

    Among maximizers the lexicographically smallest permutation is returned:
    optimal assignments are exactly the perfect matchings on the edges left
    tight by the optimal duals, and the smallest one is picked row by row.
    """
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {W.shape}")
    if not np.all(np.isfinite(W)):
        raise ValueError("weights must be finite")
    s = W.shape[0]
    if s == 0:
        return ()
    C = (-W).tolist()
    assign, u, v = _hungarian_min(C)
    tol = 1e-9 * max(1.0, float(np.abs(W).max()))
    adj = [[j for j in range(s) if C[i][j] - u[i] - v[j] <= tol] for i in range(s)]
    if sum(map(len, adj)) == s:
        return tuple(assign)
    return tuple(_lex_smallest_perfect(adj, s))
