"""Tests for the per-sample quadratic-programming solvers.

The non-negativity-constrained solver is checked against the exhaustive
active-set enumeration oracle; the equality solver against hand Lagrange
calculations and its own degeneracy certificates.
"""

import numpy as np
import pytest

from minvar import (
    AssetUniverse,
    CovarianceError,
    CovMatrix,
    brute_force_noshort,
    kkt_residual,
    min_variance_equality,
    min_variance_noshort,
    true_optimum,
)


def rand_psd(rng, n, rank=None):
    rank = n if rank is None else rank
    a = rng.standard_normal((n, rank))
    return a @ a.T / rank


# ---------------------------------------------------------------------------
# CovMatrix construction and validation
# ---------------------------------------------------------------------------


def test_from_returns_shape_and_flag():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((5, 20))
    c = CovMatrix.from_returns(x)
    assert c.matrix.shape == (5, 5)
    assert not c.undersampled
    assert np.allclose(c.matrix, x @ x.T / 20)
    under = CovMatrix.from_returns(rng.standard_normal((8, 4)))
    assert under.undersampled
    assert under.rank <= 4


def test_from_matrix_validation():
    with pytest.raises(CovarianceError):
        CovMatrix.from_matrix(np.array([[1.0, 0.5], [0.2, 1.0]]))
    with pytest.raises(CovarianceError):
        CovMatrix.from_matrix(np.array([[1.0, 2.0], [2.0, 1.0]]))  # eig -1
    c = CovMatrix.from_matrix(np.eye(3))
    assert c.rank == 3
    assert not c.undersampled


def test_matrix_is_readonly():
    c = CovMatrix.from_matrix(np.eye(2))
    with pytest.raises(ValueError):
        c.matrix[0, 0] = 5.0


# ---------------------------------------------------------------------------
# Equality-constrained solver
# ---------------------------------------------------------------------------


def test_equality_identity_spec_example():
    c = CovMatrix.from_matrix(np.eye(4))
    res = min_variance_equality(c, 4.0)
    assert np.allclose(res.weights, 1.0, rtol=0, atol=1e-14)
    assert res.objective == pytest.approx(4.0, rel=1e-14)
    assert not res.degenerate
    assert res.flat_directions == 0


def test_equality_diagonal_spec_example():
    c = CovMatrix.from_matrix(np.diag([1.0, 4.0]))
    res = min_variance_equality(c, 2.0)
    assert res.weights == pytest.approx([1.6, 0.4], rel=1e-14)
    assert res.objective == pytest.approx(1.6**2 + 4 * 0.4**2, rel=1e-14)
    assert res.objective == pytest.approx(3.2, rel=1e-14)


def test_equality_matches_replica_true_optimum():
    uni = AssetUniverse(sigmas=(1.0, 2.0, 4.0))
    c = CovMatrix.from_matrix(np.diag(np.asarray(uni.sigmas) ** 2))
    res = min_variance_equality(c, float(uni.n))
    opt = true_optimum(uni)
    assert res.weights == pytest.approx(list(opt.weights), rel=1e-13)
    assert res.objective == pytest.approx(opt.risk, rel=1e-13)


def test_equality_undersampled_is_degenerate():
    rng = np.random.default_rng(1)
    n, t = 8, 4
    c = CovMatrix.from_returns(rng.standard_normal((n, t)))
    res = min_variance_equality(c, float(n))
    assert res.degenerate
    assert res.objective < 1e-10 * np.trace(c.matrix)
    assert res.flat_directions >= n - t
    assert sum(res.weights) == pytest.approx(n, abs=1e-10)


def test_equality_nullspace_orthogonal_to_budget():
    # Rank-deficient, but the null space is the zero-sum hyperplane, so the
    # objective is the constant (sum w)^2 = 9 on the whole budget plane.
    # The zero-variance degeneracy flag must NOT fire (objective > 0); the
    # solver falls back to the positive-spectrum minimum-norm point.
    n = 3
    c = CovMatrix.from_matrix(np.ones((n, n)))
    res = min_variance_equality(c, 3.0)
    assert not res.degenerate
    assert res.objective == pytest.approx(9.0, rel=1e-12)
    assert res.weights == pytest.approx([1.0, 1.0, 1.0], abs=1e-12)
    assert sum(res.weights) == pytest.approx(3.0, abs=1e-12)


def test_equality_general_full_rank_against_direct_formula():
    rng = np.random.default_rng(2)
    for _ in range(50):
        n = rng.integers(2, 9)
        c = CovMatrix.from_matrix(rand_psd(rng, n) + 0.1 * np.eye(n))
        b = float(rng.uniform(0.5, 5.0))
        res = min_variance_equality(c, b)
        inv1 = np.linalg.solve(c.matrix, np.ones(n))
        w = b * inv1 / inv1.sum()
        assert np.allclose(res.weights, w, rtol=1e-9, atol=1e-12)
        assert kkt_residual(c, res, b) < 1e-8


# ---------------------------------------------------------------------------
# No-short solver vs brute force
# ---------------------------------------------------------------------------


def test_noshort_interior_spec_example():
    c = CovMatrix.from_matrix(np.diag([1.0, 4.0]))
    res = min_variance_noshort(c, 2.0)
    assert res.weights == pytest.approx([1.6, 0.4], rel=1e-13)
    assert res.active_set == ()
    assert not res.degenerate


def test_noshort_identity_spec_example():
    c = CovMatrix.from_matrix(np.eye(5))
    res = min_variance_noshort(c, 5.0)
    assert np.allclose(res.weights, 1.0, atol=1e-13)
    assert res.active_set == ()


def test_noshort_negative_correlation_binds():
    # Strong negative off-diagonal drives one equality weight negative;
    # the ban must zero it exactly.
    # Asset 1 is high-variance and strongly positively correlated with the
    # cheap asset 0, so the unconstrained optimum shorts it.
    m = np.array(
        [
            [1.0, 1.8, 0.0],
            [1.8, 4.0, 0.0],
            [0.0, 0.0, 1.0],
        ]
    )
    c = CovMatrix.from_matrix(m)
    eq = min_variance_equality(c, 3.0)
    assert min(eq.weights) < 0  # the premise of the example
    res = min_variance_noshort(c, 3.0)
    assert len(res.active_set) >= 1
    for i in res.active_set:
        assert res.weights[i] == 0.0
    ref = brute_force_noshort(c, 3.0)
    assert res.objective == pytest.approx(ref.objective, abs=1e-12)
    assert res.active_set == ref.active_set


def test_noshort_diagonal_never_eliminates():
    rng = np.random.default_rng(3)
    for _ in range(20):
        d = rng.uniform(0.2, 5.0, size=6)
        c = CovMatrix.from_matrix(np.diag(d))
        res = brute_force_noshort(c, 6.0)
        assert res.active_set == ()
        assert min(res.weights) > 0


def test_noshort_random_instances_match_brute_force():
    rng = np.random.default_rng(4)
    for k in range(200):
        n = int(rng.integers(2, 9))
        rank = int(rng.integers(1, n + 1)) if k % 3 == 0 else n
        c = CovMatrix.from_matrix(rand_psd(rng, n, rank))
        b = float(rng.uniform(0.5, 3.0))
        res = min_variance_noshort(c, b)
        ref = brute_force_noshort(c, b)
        assert res.objective == pytest.approx(ref.objective, abs=1e-10 + 1e-10 * ref.objective)
        assert kkt_residual(c, res, b) < 1e-8
        assert sum(res.weights) == pytest.approx(b, abs=1e-10)
        assert min(res.weights) >= 0.0


def test_noshort_rank1_flat_case():
    # Mixed-sign loading vector: the positive orthant slice of the budget
    # plane intersects the null space, so zero in-sample variance is
    # attainable with non-negative weights.
    v = np.array([1.0, -1.0, 0.0])
    c = CovMatrix.from_matrix(np.outer(v, v))
    res = min_variance_noshort(c, 3.0)
    assert res.degenerate
    assert res.objective < c.tol_zero
    ref = brute_force_noshort(c, 3.0)
    assert ref.objective == pytest.approx(0.0, abs=1e-12)
    assert res.flat_directions == 2
    assert kkt_residual(c, res, 3.0) < 1e-8


def test_noshort_objective_dominates_equality():
    rng = np.random.default_rng(5)
    for _ in range(100):
        n = int(rng.integers(2, 9))
        c = CovMatrix.from_matrix(rand_psd(rng, n))
        b = float(rng.uniform(0.5, 3.0))
        eq = min_variance_equality(c, b)
        ns = min_variance_noshort(c, b)
        assert ns.objective >= eq.objective - 1e-10


def test_permutation_equivariance():
    rng = np.random.default_rng(6)
    n = 6
    m = rand_psd(rng, n) + 0.05 * np.eye(n)
    perm = rng.permutation(n)
    c = CovMatrix.from_matrix(m)
    cp = CovMatrix.from_matrix(m[np.ix_(perm, perm)])
    res = min_variance_noshort(c, 2.0)
    resp = min_variance_noshort(cp, 2.0)
    assert np.allclose(np.asarray(res.weights)[perm], resp.weights, atol=1e-10)
    assert resp.objective == pytest.approx(res.objective, rel=1e-10)


def test_scaling_properties():
    rng = np.random.default_rng(7)
    m = rand_psd(rng, 5) + 0.05 * np.eye(5)
    c = CovMatrix.from_matrix(m)
    cs = CovMatrix.from_matrix(7.0 * m)
    res = min_variance_noshort(c, 2.0)
    ress = min_variance_noshort(cs, 2.0)
    assert np.allclose(ress.weights, res.weights, atol=1e-11)
    assert ress.objective == pytest.approx(7.0 * res.objective, rel=1e-11)
    # Budget scaling: weights and sqrt-objective scale linearly.
    resb = min_variance_noshort(c, 6.0)
    assert np.allclose(resb.weights, 3.0 * np.asarray(res.weights), atol=1e-9)
    assert resb.objective == pytest.approx(9.0 * res.objective, rel=1e-9)


def test_kkt_residual_detects_perturbation():
    c = CovMatrix.from_matrix(np.diag([1.0, 4.0, 2.0]))
    res = min_variance_noshort(c, 3.0)
    assert kkt_residual(c, res, 3.0) < 1e-8
    import dataclasses

    w = np.asarray(res.weights).copy()
    w[0] += 1e-3
    w[1] -= 1e-3
    bad = dataclasses.replace(res, weights=w)
    assert kkt_residual(c, bad, 3.0) > 1e-4


def test_brute_force_guards():
    with pytest.raises(ValueError):
        brute_force_noshort(CovMatrix.from_matrix(np.eye(13)), 1.0)
    with pytest.raises(ValueError):
        brute_force_noshort(CovMatrix.from_matrix(np.eye(3)), -1.0)
