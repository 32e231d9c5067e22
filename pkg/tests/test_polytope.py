import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairmac.polytope import (BvnDecomposition, StochMatrix, bvn_decompose, bvn_sample, kl_project,
                              kl_project_rows, matrix_divergence, max_weight_matching, permutation_matrix,
                              round_stages, round_to_birkhoff, sample_permutation)
from oracles import brute_matching, grid_kl, kl_objective, random_doubly, random_stochastic


def l1(A):
    return float(np.abs(A).sum())


# ---------------------------------------------------------------------------
# rounding
# ---------------------------------------------------------------------------

def test_round_fixed_point_on_doubly_stochastic():
    P = np.full((2, 2), 0.5)
    np.testing.assert_array_equal(round_to_birkhoff(P).entries, P)


def test_round_collapsed_column():
    # column 1 scales to (0.5, 0.5); row deficits (0.5, 0.5), column deficits (0, 1)
    out = round_to_birkhoff([[1.0, 0.0], [1.0, 0.0]])
    np.testing.assert_allclose(out.entries, np.full((2, 2), 0.5), atol=1e-15)
    assert out.kind == "doubly"


def test_round_small_example():
    # column 1 is scaled by 1/1.3, then a rank-one fill of column 2 with C = 0.3
    out = round_to_birkhoff([[0.7, 0.3], [0.6, 0.4]]).entries
    np.testing.assert_allclose(out, [[7 / 13, 6 / 13], [6 / 13, 7 / 13]], atol=1e-12)
    np.testing.assert_allclose(out, [[0.5385, 0.4615], [0.4615, 0.5385]], atol=1e-3)


def test_round_zero_deficit_returns_scaled_matrix():
    P = np.array([[2.0, 0.0], [0.0, 3.0]])
    P1, P2, out = round_stages(P)
    np.testing.assert_array_equal(out, np.eye(2))
    np.testing.assert_array_equal(P2, out)


@pytest.mark.parametrize("bad", [[[-0.1, 1.1], [0.5, 0.5]], [[np.nan, 1], [0, 1]], [[1, 0, 0]]])
def test_round_rejects_bad_input(bad):
    with pytest.raises(ValueError):
        round_to_birkhoff(bad)


@pytest.mark.parametrize("eps", [0.0, 0.01, 0.1])
@pytest.mark.parametrize("kind", ["row", "col"])
def test_round_guarantees(eps, kind):
    rng = np.random.default_rng(11)
    for _ in range(150):
        s = int(rng.integers(2, 8))
        e = min(eps, 0.9 / s)
        P = random_stochastic(rng, s, e, kind)
        _, P2, Q = round_stages(P)
        np.testing.assert_allclose(Q.sum(axis=0), 1, atol=1e-9)
        np.testing.assert_allclose(Q.sum(axis=1), 1, atol=1e-9)
        assert Q.min() >= e / s - 1e-12
        assert l1(Q - P2) <= s - l1(P2) + 1e-9
        dev = l1(P.sum(axis=1) - 1) + l1(P.sum(axis=0) - 1)
        assert l1(P - Q) <= 2 * dev + 1e-9
        if kind == "row":
            assert l1(Q - P) <= 2 * l1(P.sum(axis=0) - 1) + 1e-9


def test_round_to_birkhoff_records_floor():
    rng = np.random.default_rng(0)
    P = random_stochastic(rng, 4, 0.1)
    out = round_to_birkhoff(P, eps=0.1)
    assert out.floor == pytest.approx(0.025)
    out.validate()


def test_stoch_matrix_validation():
    StochMatrix(np.eye(3), "doubly").validate()
    with pytest.raises(ValueError):
        StochMatrix(np.array([[0.5, 0.5], [0.2, 0.2]]), "row").validate()
    with pytest.raises(ValueError):
        StochMatrix(np.array([[0.5, 0.4], [0.5, 0.6]]), "col", floor=0.45).validate()
    with pytest.raises(ValueError):
        StochMatrix(np.eye(2), "banana").validate()


# ---------------------------------------------------------------------------
# Birkhoff-von Neumann
# ---------------------------------------------------------------------------

def test_bvn_identity():
    d = bvn_decompose(np.eye(4))
    np.testing.assert_array_equal(d.weights, [1.0])
    assert d.permutations == ((0, 1, 2, 3),)


def test_bvn_uniform_2x2():
    d = bvn_decompose(np.full((2, 2), 0.5))
    np.testing.assert_allclose(d.weights, [0.5, 0.5])
    assert set(d.permutations) == {(0, 1), (1, 0)}


def test_bvn_random_4x4_reconstructs():
    rng = np.random.default_rng(4)
    P = random_doubly(rng, 4)
    d = bvn_decompose(P)
    assert np.abs(d.reconstruct() - P).max() <= 1e-9
    assert len(d) <= 4 * 4 - 2 * 4 + 2


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 7), st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_bvn_reconstruction_property(s, terms, seed):
    rng = np.random.default_rng(seed)
    P = random_doubly(rng, s, terms)
    d = bvn_decompose(P)
    assert np.abs(d.reconstruct() - P).max() <= 1e-9
    assert len(d) <= s * s - 2 * s + 2
    assert np.all(d.weights > 0)
    for perm in d.permutations:
        assert sorted(perm) == list(range(s))


def test_bvn_dense_floored_input():
    rng = np.random.default_rng(5)
    for _ in range(50):
        s = int(rng.integers(2, 7))
        Q = round_to_birkhoff(random_stochastic(rng, s, 0.05)).entries
        d = bvn_decompose(Q)
        assert np.abs(d.reconstruct() - Q).max() <= 1e-9
        assert len(d) <= s * s - 2 * s + 2


def test_bvn_rejects_non_doubly():
    with pytest.raises(ValueError):
        bvn_decompose([[0.7, 0.3], [0.6, 0.4]])


def test_decomposition_validation():
    with pytest.raises(ValueError):
        BvnDecomposition(np.array([0.5, 0.4]), ((0, 1), (1, 0)))
    with pytest.raises(ValueError):
        BvnDecomposition(np.array([1.0, 0.0]), ((0, 1), (1, 0)))


def test_sample_single_term():
    d = bvn_decompose(np.eye(3))
    rng = np.random.default_rng(0)
    assert all(sample_permutation(d, rng) == 0 for _ in range(100))


def test_sample_uses_one_draw():
    d = bvn_decompose(np.full((2, 2), 0.5))
    a, b = np.random.default_rng(3), np.random.default_rng(3)
    sample_permutation(d, a)
    b.random()
    assert a.random() == b.random()


def test_sample_frequency_half():
    d = BvnDecomposition(np.array([0.5, 0.5]), ((0, 1), (1, 0)))
    rng = np.random.default_rng(2024)
    N = 100_000
    hits = sum(sample_permutation(d, rng) == 0 for _ in range(N))
    assert abs(hits / N - 0.5) <= 0.01


def test_sample_pruned_terms_absent():
    # zero-weight terms never enter a decomposition, so they are never drawn
    d = bvn_decompose(np.eye(2))
    assert len(d) == 1
    rng = np.random.default_rng(1)
    assert {sample_permutation(d, rng) for _ in range(1000)} == {0}


def test_lazy_sampling_matches_full_decomposition():
    rng = np.random.default_rng(9)
    for _ in range(200):
        s = int(rng.integers(1, 7))
        P = round_to_birkhoff(random_stochastic(rng, s, 0.02)).entries
        d = bvn_decompose(P)
        cum = np.cumsum(d.weights)
        for u in rng.random(5):
            full = d.permutations[min(int(np.searchsorted(cum, u, side="right")), len(cum) - 1)]
            assert bvn_sample(P, u) == full


# ---------------------------------------------------------------------------
# KL projection
# ---------------------------------------------------------------------------

def test_kl_zero_gradient_fixed_point():
    np.testing.assert_allclose(kl_project(np.zeros(4), np.full(4, 0.25), 0.1), np.full(4, 0.25))


def test_kl_no_floor_closed_form():
    rng = np.random.default_rng(1)
    for _ in range(20):
        x = rng.normal(size=5)
        y = rng.dirichlet(np.ones(5))
        z = y * np.exp(x)
        np.testing.assert_allclose(kl_project(x, y, 0.0), z / z.sum(), rtol=1e-12)


def test_kl_floor_binds():
    # grid oracle at resolution 1e-3 gives (0.1, 0.1, 0.8)
    p = kl_project([0.0, 0.0, 5.0], np.full(3, 1 / 3), 0.1)
    np.testing.assert_allclose(p, [0.1, 0.1, 0.8], atol=1e-12)
    g, _ = grid_kl([0.0, 0.0, 5.0], np.full(3, 1 / 3), 0.1)
    np.testing.assert_allclose(g, [0.1, 0.1, 0.8], atol=1e-3)


def test_kl_against_grid():
    rng = np.random.default_rng(21)
    for _ in range(60):
        l = int(rng.integers(1, 4))
        eps = float(rng.uniform(0, 1 / l)) if rng.random() < 0.8 else 0.0
        y = rng.dirichlet(np.ones(l)) * 0.9 + 0.1 / l
        x = rng.normal(scale=2.0, size=l)
        p = kl_project(x, y, eps)
        _, best = grid_kl(x, y, eps)
        assert kl_objective(p, x, y) <= best + 1e-4
        assert abs(p.sum() - 1) <= 1e-12 and p.min() >= eps - 1e-12


def test_kl_ties_are_deterministic():
    p = kl_project(np.zeros(3), np.array([0.2, 0.2, 0.6]), 0.25)
    np.testing.assert_allclose(p, [0.25, 0.25, 0.5])


def test_kl_unnormalized_reference():
    y = np.array([0.2, 0.6])
    np.testing.assert_allclose(kl_project(np.zeros(2), y, 0.0), [0.25, 0.75])


@pytest.mark.parametrize("eps,y", [(0.6, [0.5, 0.5]), (-0.1, [0.5, 0.5]), (0.1, [0.0, 1.0])])
def test_kl_rejects(eps, y):
    with pytest.raises(ValueError):
        kl_project(np.zeros(2), np.array(y), eps)


def test_kl_rows_matches_vector_form():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(4, 4))
    Y = rng.dirichlet(np.ones(4), size=4)
    out = kl_project_rows(X, Y, 0.05)
    for i in range(4):
        np.testing.assert_allclose(out[i], kl_project(X[i], Y[i], 0.05))


def test_push_back_inequality():
    rng = np.random.default_rng(31)
    for _ in range(100):
        s = int(rng.integers(2, 6))
        eps = float(rng.uniform(0, 0.9 / s))
        alpha = float(rng.uniform(0.1, 5))
        G = rng.normal(size=(s, s))  # g(X) = -<G, X>
        Y = random_stochastic(rng, s, eps + 1e-3 if eps * s + s * 1e-3 < 1 else eps)
        Xs = kl_project_rows(G / alpha, Y, eps)
        Z = random_stochastic(rng, s, eps)
        lhs = -np.sum(G * Xs) + alpha * matrix_divergence(Xs, Y)
        rhs = -np.sum(G * Z) + alpha * matrix_divergence(Z, Y) - alpha * matrix_divergence(Z, Xs)
        assert lhs <= rhs + 1e-9


def test_pinsker_matrix_form():
    rng = np.random.default_rng(41)
    for _ in range(300):
        s = int(rng.integers(1, 7))
        X = random_stochastic(rng, s, 0.0)
        Y = random_stochastic(rng, s, 1e-3)
        assert matrix_divergence(X, Y) >= l1(X - Y) ** 2 / (2 * s) - 1e-12


# ---------------------------------------------------------------------------
# matching
# ---------------------------------------------------------------------------

def test_matching_diagonal():
    assert max_weight_matching(10 * np.eye(4)) == (0, 1, 2, 3)


def test_matching_small_example():
    perm = max_weight_matching([[1, 2], [2, 1]])
    assert perm == (1, 0)  # 1-based (2, 1), value 4


def test_matching_zero_matrix_identity():
    assert max_weight_matching(np.zeros((5, 5))) == (0, 1, 2, 3, 4)


def test_matching_rejects_nonfinite():
    with pytest.raises(ValueError):
        max_weight_matching([[np.inf, 0], [0, 0]])


@pytest.mark.parametrize("s", [1, 2, 3, 4, 5, 6])
def test_matching_brute_force_with_ties(s):
    rng = np.random.default_rng(s)
    for _ in range(40):
        W = rng.integers(0, 3, size=(s, s)).astype(float)
        perm, val = brute_matching(W)
        got = max_weight_matching(W)
        assert got == perm
        assert sum(W[i, got[i]] for i in range(s)) == val


@pytest.mark.parametrize("s", [2, 4, 6])
def test_matching_brute_force_real(s):
    rng = np.random.default_rng(100 + s)
    for _ in range(40):
        W = rng.normal(size=(s, s)) * rng.uniform(0.1, 100)
        perm, val = brute_matching(W)
        got = max_weight_matching(W)
        assert got == perm
        assert sum(W[i, got[i]] for i in range(s)) == pytest.approx(val, abs=1e-9)


def test_permutation_matrix():
    np.testing.assert_array_equal(permutation_matrix((1, 0)), [[0, 1], [1, 0]])
    assert all(permutation_matrix(p).sum() == 3 for p in itertools.permutations(range(3)))
