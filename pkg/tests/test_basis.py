import numpy as np
import pytest

from koopkin import DataError
from koopkin.basis import (
    ConstantAugmentedBasis,
    DecorrelatedBasis,
    GaussianBasis,
    IndicatorBasis,
    LinearBasis,
    apply_decorrelation,
    basis_from_config,
    evaluate,
    fit_decorrelation,
    make_gaussian_basis,
)


def _whitened_cov(Z, w=None):
    w = np.full(Z.shape[0], 1.0 / Z.shape[0]) if w is None else w
    mu = w @ Z
    return (Z * w[:, None]).T @ Z - np.outer(mu, mu), mu


def test_gaussian_values():
    flat = GaussianBasis(np.zeros((1, 1)), np.zeros(1))
    assert np.allclose(evaluate(flat, np.array([[3.7], [-2.0]])), 1.0)
    unit = GaussianBasis(np.ones((1, 1)), np.zeros(1))
    assert np.isclose(evaluate(unit, np.array([[1.0]]))[0, 0], 0.36787944117144233)


def test_gaussian_basis_is_reproducible():
    a = make_gaussian_basis(100, 1, seed=7)
    b = make_gaussian_basis(100, 1, seed=7)
    assert a.m == 100
    assert np.array_equal(a.weights, b.weights)
    assert np.array_equal(a.offsets, b.offsets)
    assert not np.array_equal(a.weights, make_gaussian_basis(100, 1, seed=8).weights)


def test_gaussian_parameter_ranges():
    g = make_gaussian_basis(500, 2, seed=1)
    assert g.weights.min() >= -1 and g.weights.max() <= 1
    assert g.offsets.min() >= 0 and g.offsets.max() <= 1
    vals = g.evaluate(np.random.default_rng(0).normal(size=(50, 2)))
    assert np.all(vals > 0) and np.all(vals <= 1)


def test_gaussian_count_must_be_positive():
    with pytest.raises(ValueError):
        make_gaussian_basis(0)


def test_indicator_membership():
    basis = IndicatorBasis(edges=[np.array([0.0, 1.0, 2.0])])
    assert np.array_equal(basis.evaluate(np.array([[1.5]])), [[0, 1]])
    # cells are half-open except the last edge
    assert np.array_equal(basis.evaluate(np.array([[1.0], [2.0], [0.0]])),
                          [[0, 1], [0, 1], [1, 0]])


def test_indicator_out_of_domain_names_frame():
    basis = IndicatorBasis(edges=[np.array([0.0, 1.0, 2.0])])
    with pytest.raises(DataError, match="frame 1"):
        basis.evaluate(np.array([[0.5], [2.5]]))


def test_indicator_partition_of_unity_2d(rng):
    basis = IndicatorBasis(edges=[np.linspace(-1, 1, 4), np.linspace(0, 2, 6)])
    pts = np.column_stack([rng.uniform(-1, 1, 200), rng.uniform(0, 2, 200)])
    vals = basis.evaluate(pts)
    assert vals.shape == (200, 15)
    assert np.all(vals.sum(axis=1) == 1)


def test_indicator_with_assign_function():
    basis = IndicatorBasis(assign=lambda f: (np.asarray(f)[:, 0] > 0).astype(int), n_states=2)
    assert np.array_equal(basis.evaluate(np.array([[-1.0], [2.0]])), [[1, 0], [0, 1]])


def test_discrete_indicator():
    basis = IndicatorBasis.discrete(3)
    assert np.array_equal(basis.evaluate(np.array([2.0, 0.0, 1.0])), np.eye(3)[[2, 0, 1]])


def test_linear_basis_fit_is_mean_free(rng):
    frames = rng.normal(loc=3.0, size=(40, 2))
    basis = LinearBasis.fit(frames)
    assert np.allclose(basis.evaluate(frames).mean(axis=0), 0)


def test_constant_column_gives_constant_only_basis():
    t = fit_decorrelation(np.ones((10, 1)))
    assert t.kept_rank == 0
    assert t.m_out == 1
    assert np.allclose(apply_decorrelation(t, np.ones((3, 1))), 1.0)


def test_duplicate_columns_keep_rank_one(rng):
    col = rng.normal(size=(50, 1))
    t = fit_decorrelation(np.hstack([col, col]))
    assert t.kept_rank == 1
    assert t.m_out == 2


def test_degenerate_without_constant():
    with pytest.raises(DataError, match="basis degenerate"):
        fit_decorrelation(np.ones((10, 2)), append_constant=False)


def test_default_cutoff():
    t = fit_decorrelation(np.random.default_rng(0).normal(size=(20, 2)))
    assert t.eps0 == 1e-10


def test_whitening_gives_identity_and_zero_mean(rng):
    A = rng.normal(size=(4, 6))
    X = rng.normal(size=(300, 4)) @ A + 5.0  # rank 4 in 6 columns
    t = fit_decorrelation(X)
    Z = apply_decorrelation(t, X)
    assert t.kept_rank == 4
    assert np.allclose(Z[:, -1], 1.0)
    cov, mu = _whitened_cov(Z[:, :-1])
    assert np.allclose(cov, np.eye(4), atol=1e-8)
    assert np.allclose(mu, 0, atol=1e-10)
    # direct second moment including the constant is the identity
    assert np.allclose(Z.T @ Z / Z.shape[0], np.eye(5), atol=1e-8)


def test_weighted_whitening(rng):
    X = rng.normal(size=(200, 3)) * [1.0, 5.0, 0.1]
    w = rng.uniform(0.1, 1.0, size=200)
    w /= w.sum()
    t = fit_decorrelation(X, weights=w)
    cov, mu = _whitened_cov(apply_decorrelation(t, X)[:, :-1], w)
    assert np.allclose(cov, np.eye(3), atol=1e-8)
    assert np.allclose(mu, 0, atol=1e-10)


def test_forward_backward_whitening(rng):
    X = rng.normal(size=(100, 3))
    Y = rng.normal(size=(100, 3)) + 1.0
    t = fit_decorrelation(X, Y=Y)
    Zx = apply_decorrelation(t, X)
    Zy = apply_decorrelation(t, Y)
    assert np.allclose((Zx.T @ Zx + Zy.T @ Zy) / 200, np.eye(4), atol=1e-8)


def test_whitening_of_white_data_is_rotation(rng):
    Q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    raw = rng.normal(size=(500, 3))
    raw -= raw.mean(axis=0)
    raw = raw @ _inv_sqrt(raw.T @ raw / 500)  # exactly white
    t = fit_decorrelation(raw @ Q)
    R = t.projection
    assert np.allclose(R @ R.T, np.eye(3), atol=1e-8)


def _inv_sqrt(a):
    s, q = np.linalg.eigh(a)
    return (q / np.sqrt(s)) @ q.T


def test_weights_must_sum_to_one(rng):
    with pytest.raises(ValueError):
        fit_decorrelation(rng.normal(size=(5, 2)), weights=np.ones(5))


def test_decorrelated_basis_matches_apply(rng):
    g = make_gaussian_basis(5, 1, seed=3)
    frames = rng.uniform(0, 2, size=(30, 1))
    t = fit_decorrelation(g.evaluate(frames))
    db = DecorrelatedBasis(g, t)
    assert db.m == t.m_out
    assert np.allclose(db.evaluate(frames), apply_decorrelation(t, g.evaluate(frames)))


def test_config_roundtrip(rng):
    g = make_gaussian_basis(4, 2, seed=5)
    frames = rng.normal(size=(20, 2))
    t = fit_decorrelation(g.evaluate(frames))
    for basis in (g, LinearBasis(2, np.array([1.0, 2.0])), ConstantAugmentedBasis(g),
                  DecorrelatedBasis(g, t), IndicatorBasis(edges=[[0, 1, 2], [0, 0.5, 1]])):
        back = basis_from_config(basis.to_config())
        pts = np.abs(frames) % 1.0
        assert np.allclose(back.evaluate(pts), basis.evaluate(pts))
    spec = basis_from_config({"kind": "gaussian", "count": 4, "input_dim": 2, "seed": 5})
    assert np.array_equal(spec.weights, g.weights)
