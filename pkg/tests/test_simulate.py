import numpy as np
import pytest
import scipy.optimize

from koopkin import DataError, implied_timescales
from koopkin.basis import ConstantAugmentedBasis, IndicatorBasis, LinearBasis
from koopkin.simulate import (
    WELL1D_CENTERS,
    PotentialSpec,
    build_grid_chain,
    exact_covariances,
    grid_chain_from_energies,
    potential_1d,
    potential_2d,
    reference_spectrum,
    simulate_chain,
)


def test_flat_three_bin_chain():
    chain = grid_chain_from_energies(np.zeros(3), [np.arange(4.0)], beta=1.0, dt_chain=1.0)
    assert np.allclose(chain.P[1], [0.25, 0.5, 0.25])
    assert np.allclose(chain.P[0], [0.75, 0.25, 0.0])
    assert np.allclose(chain.stationary, 1 / 3)


def test_two_bin_chain_detailed_balance():
    beta = 2.0
    chain = grid_chain_from_energies(np.array([0.0, np.log(2) / beta]), [np.arange(3.0)],
                                     beta, 1.0)
    assert np.allclose(chain.stationary, [2 / 3, 1 / 3])
    flux = chain.stationary[:, None] * chain.P
    assert np.allclose(flux, flux.T, atol=1e-15)


def test_two_state_second_eigenvalue():
    chain = grid_chain_from_energies(np.array([0.0, 0.7]), [np.arange(3.0)], 1.0, 1.0)
    a, b = chain.P[0, 1], chain.P[1, 0]
    ref = reference_spectrum(chain, 2)
    assert np.isclose(ref.eigenvalues[1], 1 - a - b)
    ref3 = reference_spectrum(chain, 2, lag_steps=3)
    assert np.isclose(ref3.eigenvalues[1], (1 - a - b) ** 3)


def test_1d_benchmark_chain(chain_1d):
    chain, frame_steps = chain_1d
    assert chain.n_states == 100
    assert np.allclose(chain.P.sum(axis=1), 1, atol=1e-12)
    flux = chain.stationary[:, None] * chain.P
    assert np.max(np.abs(flux - flux.T)) <= 1e-12
    assert np.isclose(frame_steps * chain.dt_chain, 0.002)


def test_2d_chain_shape_and_balance():
    chain = build_grid_chain(PotentialSpec("triplewell2d", 0.5), [(-3, 3), (-2.6, 3.4)], 0.2)
    assert chain.shape == (30, 30)
    flux = chain.stationary[:, None] * chain.P
    assert np.max(np.abs(flux - flux.T)) <= 1e-12
    # x-mirror symmetry of the surface carries over to the stationary distribution
    pi = chain.stationary.reshape(30, 30)
    assert np.allclose(pi, pi[::-1, :], atol=1e-15)


def test_default_time_step_matches_diffusion():
    pot = PotentialSpec("well1d", 0.3)
    chain = build_grid_chain(pot, (0, 2), 0.02)
    # per-step variance h^2/2 equals 2 D dt with D = 1/beta
    assert np.isclose(chain.dt_chain, 0.02 ** 2 * 0.3 / 4)


def test_grid_errors():
    pot = PotentialSpec("well1d", 0.3)
    with pytest.raises(ValueError):
        build_grid_chain(pot, (0, 0.02), 0.02)
    with pytest.raises(ValueError):
        build_grid_chain(pot, (0, 1), 0.3)
    with pytest.raises(ValueError):
        build_grid_chain(pot, [(0, 1), (0, 1)], 0.1)


def test_reference_spectrum_properties(chain_1d):
    chain, frame_steps = chain_1d
    ref = reference_spectrum(chain, 6, lag_steps=5 * frame_steps)
    assert ref.eigenvalues[0] == 1.0
    assert np.all(np.abs(ref.eigenvalues) <= 1)
    assert np.all(np.diff(ref.eigenvalues) <= 0)
    assert np.allclose(ref.eigenfunctions[:, 0], ref.eigenfunctions[0, 0])
    gram = ref.eigenfunctions.T @ (ref.stationary[:, None] * ref.eigenfunctions)
    assert np.allclose(gram, np.eye(6), atol=1e-10)
    assert np.allclose(ref.timescales[1:],
                       implied_timescales(ref.eigenvalues, ref.lag_time)[1:])
    # exact timescales do not depend on the lag
    ref2 = reference_spectrum(chain, 6, lag_steps=25 * frame_steps)
    assert np.allclose(ref.timescales[1:], ref2.timescales[1:])


def test_potential_1d_equal_depths_is_flat():
    x = np.linspace(-1, 3, 50)
    U, dU = potential_1d(x, u=(2.0,) * 5)
    assert np.allclose(U, 2.0) and np.allclose(dU, 0.0, atol=1e-9)


def test_potential_1d_at_centre():
    u = (5.0, 0.0, 4.0, 0.5, 5.0)
    U, _ = potential_1d(np.array([WELL1D_CENTERS[2]]), u=u)
    assert abs(U[0] - u[2]) < 1e-4


def test_potential_2d_value():
    U, _ = potential_2d(np.array(1.0), np.array(0.0))
    expect = (3 * np.exp(-1 - 1 / 9) - 3 * np.exp(-1 - 25 / 9) - 5 - 5 * np.exp(-4)
              + 0.2 + 0.2 * (1 / 3) ** 4)
    assert np.isclose(U, expect, rtol=0, atol=1e-14)


def test_potential_2d_mirror_symmetry(rng):
    x, y = rng.uniform(-2, 2, 100), rng.uniform(-2, 3, 100)
    assert np.allclose(potential_2d(x, y)[0], potential_2d(-x, y)[0], atol=1e-14)


def test_potential_2d_minimum_has_zero_gradient():
    def f(p):
        U, g = potential_2d(p[0], p[1])
        return float(U), np.asarray(g, dtype=float)
    res = scipy.optimize.minimize(f, [0.9, 0.1], jac=True, method="BFGS",
                                  options={"gtol": 1e-12})
    assert np.linalg.norm(f(res.x)[1]) < 1e-6


def test_simulate_is_deterministic(chain_1d):
    chain, frame_steps = chain_1d
    a = simulate_chain(chain, 5, 20, (0, 0.2), seed=3, frame_steps=frame_steps)
    b = simulate_chain(chain, 5, 20, (0, 0.2), seed=3, frame_steps=frame_steps)
    c = simulate_chain(chain, 5, 20, (0, 0.2), seed=4, frame_steps=frame_steps)
    assert all(np.array_equal(x, y) for x, y in zip(a.trajectories, b.trajectories))
    assert not all(np.array_equal(x, y) for x, y in zip(a.trajectories, c.trajectories))
    assert np.isclose(a.dt, 0.002)


def test_simulate_starts_in_region_on_bin_centres(chain_1d):
    chain, _ = chain_1d
    ts = simulate_chain(chain, 200, 1, (0, 0.2), seed=0)
    x0 = np.array([t[0, 0] for t in ts.trajectories])
    assert np.all((x0 > 0) & (x0 < 0.2))
    assert np.allclose(x0, np.round((x0 - 0.01) / 0.02) * 0.02 + 0.01)
    assert len(np.unique(x0)) == 10


def test_simulate_2d_init_region():
    chain = build_grid_chain(PotentialSpec("triplewell2d", 0.5), [(-3, 3), (-2.6, 3.4)], 0.2)
    ts = simulate_chain(chain, 300, 1, [(-2, -1.5), (-1.5, 2.5)], seed=1)
    x0 = np.vstack([t[0] for t in ts.trajectories])
    # start bins overlap the region, so centres lie within half a bin of it
    assert np.all((x0[:, 0] > -2 - 0.1) & (x0[:, 0] < -1.5 + 0.1))
    assert np.all((x0[:, 1] > -1.5 - 0.1) & (x0[:, 1] < 2.5 + 0.1))


def test_empty_init_region(chain_1d):
    with pytest.raises(DataError):
        simulate_chain(chain_1d[0], 2, 5, (3.0, 4.0))


def test_long_run_occupancy_converges(chain_1d):
    chain, frame_steps = chain_1d
    n_frames = 150_000  # about 1e7 chain steps
    ts = simulate_chain(chain, 1, n_frames, (0, 0.2), seed=0, frame_steps=frame_steps)
    assert (n_frames - 1) * frame_steps >= 10 ** 6
    idx = IndicatorBasis(edges=chain.edges).labels(ts.trajectories[0])
    occ = np.bincount(idx, minlength=chain.n_states) / n_frames
    assert 0.5 * np.abs(occ - chain.stationary).sum() < 0.05


def test_exact_covariances_indicator(chain_1d):
    chain, _ = chain_1d
    basis = IndicatorBasis(edges=chain.edges)
    b = exact_covariances(chain, basis, 3)
    D = np.diag(chain.stationary)
    assert np.allclose(b.C0, D, atol=1e-15)
    assert np.allclose(b.Ct, D @ np.linalg.matrix_power(chain.P, 3), atol=1e-15)


def test_exact_covariances_constant_and_linear():
    flat = grid_chain_from_energies(np.zeros(6), [np.linspace(0, 1.2, 7)], 1.0, 1.0)
    one = IndicatorBasis(edges=[np.array([0.0, 1.2])])
    b = exact_covariances(flat, one, 2)
    assert np.allclose(b.C0, [[1]]) and np.allclose(b.Ct, [[1]])
    mean = flat.stationary @ flat.bin_centers
    lin = ConstantAugmentedBasis(LinearBasis(1, mean=mean))
    b = exact_covariances(flat, lin, 4)
    assert np.allclose(b.Ct, b.Ct.T, atol=1e-15)


def test_transition_matrix_power(chain_1d):
    chain, _ = chain_1d
    assert np.allclose(chain.transition_matrix(4), np.linalg.matrix_power(chain.P, 4))
