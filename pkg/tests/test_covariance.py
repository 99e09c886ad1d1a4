import itertools

import numpy as np
import pytest

from koopkin import LagPairView
from koopkin.covariance import (
    CovarianceBundle,
    accumulate,
    direct_covariances,
    symmetrized_covariances,
    weighted_reversible_covariances,
    write_bundle_csv,
)

X_EX = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
Y_EX = np.array([[0.0, 1.0], [1.0, 0.0], [0.0, 1.0]])


def _two_state_pairs():
    # A->B, B->B, B->A, A->B
    I = np.eye(2)
    return LagPairView(I[[0, 1, 1, 0]], I[[1, 1, 0, 1]])


def test_direct_hand_example():
    b = direct_covariances(LagPairView(X_EX, Y_EX))
    assert np.allclose(b.C0, [[2 / 3, 0], [0, 1 / 3]])
    assert np.allclose(b.Ct, [[0, 2 / 3], [1 / 3, 0]])
    assert b.N == 3 and b.estimator == "direct"


def test_direct_self_pairing_and_single_pair(rng):
    X = rng.normal(size=(10, 3))
    b = direct_covariances(LagPairView(X, X))
    assert np.allclose(b.Ct, b.C0)
    one = direct_covariances(LagPairView([[1.0]], [[2.0]]))
    assert np.allclose(one.C0, [[1]]) and np.allclose(one.Ct, [[2]])


def test_symmetrized_hand_example():
    b = symmetrized_covariances(LagPairView(X_EX, Y_EX))
    assert np.allclose(b.Ct, [[0, 0.5], [0.5, 0]])
    assert np.array_equal(b.Ct, b.Ct.T)


def test_symmetrized_is_time_reversal_invariant(rng):
    X, Y = rng.normal(size=(20, 3)), rng.normal(size=(20, 3))
    a = symmetrized_covariances(LagPairView(X, Y))
    b = symmetrized_covariances(LagPairView(Y, X))
    assert np.allclose(a.C0, b.C0, atol=1e-15) and np.allclose(a.Ct, b.Ct, atol=1e-15)
    same = LagPairView(X, X)
    assert np.allclose(symmetrized_covariances(same).Ct, direct_covariances(same).Ct)


def test_uniform_weights_reduce_to_symmetrized(rng):
    X, Y = rng.normal(size=(25, 4)), rng.normal(size=(25, 4))
    pairs = LagPairView(X, Y)
    w = np.full(25, 1 / 25)
    a = weighted_reversible_covariances(pairs, w)
    b = symmetrized_covariances(pairs)
    assert np.allclose(a.C0, b.C0, rtol=0, atol=1e-12)
    assert np.allclose(a.Ct, b.Ct, rtol=0, atol=1e-12)


def test_weighted_two_state_example():
    b = weighted_reversible_covariances(_two_state_pairs(), [1 / 6, 1 / 3, 1 / 3, 1 / 6])
    assert np.allclose(b.C0, np.diag([1 / 3, 2 / 3]), atol=1e-15)
    assert np.allclose(b.Ct, [[0, 1 / 3], [1 / 3, 1 / 3]], atol=1e-15)
    assert np.array_equal(b.Ct, b.Ct.T)


def test_all_weight_on_one_pair(rng):
    X, Y = rng.normal(size=(5, 3)), rng.normal(size=(5, 3))
    w = np.zeros(5)
    w[2] = 1.0
    b = weighted_reversible_covariances(LagPairView(X, Y), w)
    expect = 0.5 * (np.outer(X[2], X[2]) + np.outer(Y[2], Y[2]))
    assert np.allclose(b.C0, expect)
    assert np.linalg.matrix_rank(b.C0) <= 2


def test_weighted_rejects_bad_weights(rng):
    pairs = LagPairView(rng.normal(size=(3, 2)), rng.normal(size=(3, 2)))
    with pytest.raises(ValueError):
        weighted_reversible_covariances(pairs, [0.5, np.nan, 0.5])
    with pytest.raises(ValueError):
        weighted_reversible_covariances(pairs, [0.5, 0.5])
    with pytest.raises(ValueError):
        weighted_reversible_covariances(pairs, [1.0, 1.0, 1.0])


def test_negative_weights_warn():
    pairs = LagPairView(np.eye(3), np.eye(3))
    with pytest.warns(UserWarning) as record:
        b = weighted_reversible_covariances(pairs, [1.2, 0.1, -0.3])
    messages = [str(r.message) for r in record]
    assert any("negative weights" in m for m in messages)
    assert any("not positive semidefinite" in m for m in messages)
    assert b.C0[2, 2] < 0


def test_indicator_c0_is_state_fractions():
    I = np.eye(3)
    X = I[[0, 0, 2, 1, 0]]
    b = direct_covariances(LagPairView(X, X))
    assert np.allclose(b.C0, np.diag([0.6, 0.2, 0.2]))


def test_accumulate_split_equals_unsplit(rng):
    X, Y = rng.normal(size=(30, 3)), rng.normal(size=(30, 3))
    whole = direct_covariances(LagPairView(X, Y))
    parts = [direct_covariances(LagPairView(X[a:b], Y[a:b])) for a, b in ((0, 7), (7, 30))]
    acc = accumulate(parts)
    assert acc.N == 30
    assert np.allclose(acc.C0, whole.C0, rtol=0, atol=1e-12)
    assert np.allclose(acc.Ct, whole.Ct, rtol=0, atol=1e-12)


def test_accumulate_single_is_identity(rng):
    b = direct_covariances(LagPairView(rng.normal(size=(4, 2)), rng.normal(size=(4, 2))))
    assert accumulate([b]) is b


def test_accumulate_weights_by_pair_count():
    bundles = [CovarianceBundle(np.full((1, 1), v), np.full((1, 1), v), "direct", n, 1)
               for v, n in ((1.0, 1), (2.0, 2), (3.0, 3))]
    acc = accumulate(bundles)
    assert np.isclose(acc.C0[0, 0], 1 / 6 + 2 * 2 / 6 + 3 * 3 / 6)


def test_accumulate_is_order_independent(rng):
    parts = []
    for n in (3, 11, 5, 8):
        X, Y = rng.normal(size=(n, 3)) * 1e3, rng.normal(size=(n, 3))
        parts.append(symmetrized_covariances(LagPairView(X, Y)))
    results = [accumulate(list(p)) for p in itertools.permutations(parts)]
    for r in results[1:]:
        assert np.array_equal(r.C0, results[0].C0)
        assert np.array_equal(r.Ct, results[0].Ct)


def test_accumulate_rejects_mismatch(rng):
    a = direct_covariances(LagPairView(rng.normal(size=(4, 2)), rng.normal(size=(4, 2))))
    b = direct_covariances(LagPairView(rng.normal(size=(4, 3)), rng.normal(size=(4, 3))))
    c = symmetrized_covariances(LagPairView(rng.normal(size=(4, 2)), rng.normal(size=(4, 2))))
    with pytest.raises(ValueError):
        accumulate([a, b])
    with pytest.raises(ValueError):
        accumulate([a, c])
    with pytest.raises(ValueError):
        accumulate([])


def test_bundle_csv(tmp_path):
    b = direct_covariances(LagPairView(X_EX, Y_EX))
    path = tmp_path / "b.csv"
    write_bundle_csv(b, path)
    lines = path.read_text().splitlines()
    assert lines[3] == "matrix,row,col,value"
    assert len(lines) == 4 + 8
