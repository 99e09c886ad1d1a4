"""Benchmark dynamics on Metropolis grid chains, with an exact spectral oracle.

Overdamped Langevin dynamics ``dx = -grad U dt + sqrt(2/beta) dW`` is
replaced by a lazy nearest-neighbour Metropolis chain on a regular grid.
The chain satisfies detailed balance with respect to ``exp(-beta U)`` at the
bin centres exactly, so its spectrum and stationary distribution can be
computed by dense linear algebra and serve as ground truth.
"""

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .covariance import CovarianceBundle
from .errors import DataError
from .trajectories import TrajectorySet

__all__ = [
    "PotentialSpec",
    "GridChain",
    "ReferenceSpectrum",
    "potential_1d",
    "potential_2d",
    "build_grid_chain",
    "grid_chain_from_energies",
    "simulate_chain",
    "reference_spectrum",
    "exact_covariances",
    "steps_per_frame",
    "calibrated_chain",
    "WELL1D_CENTERS",
    "WELL1D_DEPTHS",
]

WELL1D_CENTERS = (-0.3, 0.5, 1.0, 1.5, 2.3)
# stand-in well depths: a double well on [0, 2] with its barrier at x = 1
WELL1D_DEPTHS = (5.0, 0.0, 4.0, 0.5, 5.0)


@dataclass(frozen=True)
class PotentialSpec:
    """Potential energy surface and inverse temperature.

    ``kind`` is ``"well1d"`` (inverse-distance weighted interpolation of the
    depths ``u`` placed at centres ``c``) or ``"triplewell2d"`` (fixed
    three-well surface, no parameters).
    """

    kind: str = "well1d"
    beta: float = 0.3
    c: Tuple[float, ...] = WELL1D_CENTERS
    u: Tuple[float, ...] = WELL1D_DEPTHS
    softening: float = 0.001

    def __post_init__(self):
        if self.kind not in ("well1d", "triplewell2d"):
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.kind == "well1d":
            if len(self.c) != len(self.u):
                raise ValueError("c and u must have equal length")
            if self.softening <= 0:
                raise ValueError("softening must be positive")

    @property
    def dim(self):
        return 1 if self.kind == "well1d" else 2

    def energy(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == "well1d":
            return potential_1d(points[:, 0], self.c, self.u, self.softening)[0]
        return potential_2d(points[:, 0], points[:, 1])[0]


def potential_1d(x, c=WELL1D_CENTERS, u=WELL1D_DEPTHS, softening=0.001):
    """``U(x) = sum_i r_i^-2 u_i / sum_i r_i^-2`` with ``r_i = |x - c_i| + softening``.

    Returns
    -------
    U, dU : ndarray
        Energy and its derivative, broadcast over ``x``.
    """
    x = np.asarray(x, dtype=float)
    c = np.asarray(c, dtype=float)
    u = np.asarray(u, dtype=float)
    diff = x[..., None] - c
    r = np.abs(diff) + softening
    g = r ** -2
    dg = -2.0 * r ** -3 * np.sign(diff)
    num = g @ u
    den = g.sum(axis=-1)
    U = num / den
    dU = ((dg @ u) * den - num * dg.sum(axis=-1)) / den ** 2
    return U, dU


_GAUSS_TERMS = (
    # amplitude, x-centre, y-centre
    (3.0, 0.0, 1.0 / 3.0),
    (-3.0, 0.0, 5.0 / 3.0),
    (-5.0, 1.0, 0.0),
    (-5.0, -1.0, 0.0),
)


def potential_2d(x, y):
    """Three-well surface: four Gaussian terms plus quartic confinement.

    Returns
    -------
    U : ndarray
    grad : ndarray, shape ``U.shape + (2,)``
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    U = 0.2 * x ** 4 + 0.2 * (y - 1.0 / 3.0) ** 4
    gx = 0.8 * x ** 3
    gy = 0.8 * (y - 1.0 / 3.0) ** 3
    for a, cx, cy in _GAUSS_TERMS:
        e = a * np.exp(-(x - cx) ** 2 - (y - cy) ** 2)
        U = U + e
        gx = gx - 2.0 * (x - cx) * e
        gy = gy - 2.0 * (y - cy) * e
    return U, np.stack([gx, gy], axis=-1)


@dataclass(frozen=True, eq=False)
class GridChain:
    """Reversible Markov chain on the cells of a regular grid.

    Attributes
    ----------
    bin_centers : (n, d) ndarray
    edges : list of ndarray
        Per-axis bin edges; state index is row-major over the axes.
    P : (n, n) ndarray
        One-step transition matrix.
    stationary : (n,) ndarray
    dt_chain : float
        Physical time per chain step.
    """

    bin_centers: np.ndarray
    edges: list
    P: np.ndarray
    stationary: np.ndarray
    dt_chain: float
    energies: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n_states(self):
        return self.P.shape[0]

    @property
    def shape(self):
        return tuple(e.size - 1 for e in self.edges)

    def transition_matrix(self, steps: int) -> np.ndarray:
        return np.linalg.matrix_power(self.P, int(steps))


def _check_chain(P, pi, tol=1e-12):
    if np.any(np.abs(P.sum(axis=1) - 1.0) > tol):
        raise AssertionError("grid chain rows do not sum to one")
    flux = pi[:, None] * P
    if np.max(np.abs(flux - flux.T)) > tol:
        raise AssertionError("grid chain violates detailed balance")


def grid_chain_from_energies(energies, edges, beta, dt_chain) -> GridChain:
    """Lazy Metropolis chain for energies tabulated on a grid.

    With probability 1/2 the chain stays put; otherwise it proposes one of
    the ``2d`` axis neighbours uniformly and accepts with
    ``min(1, exp(-beta dU))``. Proposals leaving the grid are rejected.
    """
    edges = [np.asarray(e, dtype=float) for e in edges]
    shape = tuple(e.size - 1 for e in edges)
    E = np.asarray(energies, dtype=float).reshape(shape)
    n = E.size
    d = len(shape)
    P = np.zeros((n, n))
    index = np.arange(n).reshape(shape)
    flatE = E.ravel()
    q = 1.0 / (4 * d)
    for axis in range(d):
        for step in (-1, 1):
            src = [slice(None)] * d
            dst = [slice(None)] * d
            if step == 1:
                src[axis], dst[axis] = slice(0, -1), slice(1, None)
            else:
                src[axis], dst[axis] = slice(1, None), slice(0, -1)
            i = index[tuple(src)].ravel()
            j = index[tuple(dst)].ravel()
            P[i, j] = q * np.minimum(1.0, np.exp(-beta * (flatE[j] - flatE[i])))
    P[np.arange(n), np.arange(n)] = 0.0
    P[np.arange(n), np.arange(n)] = 1.0 - P.sum(axis=1)
    boltz = np.exp(-beta * (flatE - flatE.min()))
    pi = boltz / boltz.sum()
    _check_chain(P, pi)
    mids = np.meshgrid(*[0.5 * (e[1:] + e[:-1]) for e in edges], indexing="ij")
    centers = np.stack([mg.ravel() for mg in mids], axis=1)
    return GridChain(centers, edges, P, pi, float(dt_chain), flatE)


def build_grid_chain(pot: PotentialSpec, domain, bin_size, scheme="metropolis_neighbor",
                     dt_chain=None) -> GridChain:
    """Discretize ``pot`` on ``domain`` with square bins of side ``bin_size``.

    Parameters
    ----------
    pot : PotentialSpec
    domain : (lo, hi) or sequence of (lo, hi) per axis
    bin_size : float
        Must divide every axis extent.
    dt_chain : float, optional
        Time per chain step. Defaults to the diffusion-matched value
        ``bin_size**2 * beta / (4 d)`` of the lazy chain (per-axis variance
        per step ``bin_size**2 / (2 d)``).
    """
    if scheme != "metropolis_neighbor":
        raise ValueError(f"unknown scheme {scheme!r}")
    domain = np.asarray(domain, dtype=float)
    if domain.ndim == 1:
        domain = domain[None, :]
    if domain.shape[0] != pot.dim:
        raise ValueError(f"{pot.kind} needs a {pot.dim}-dimensional domain")
    edges = []
    for lo, hi in domain:
        nb = (hi - lo) / bin_size
        nbins = int(round(nb))
        if abs(nb - nbins) > 1e-9 * max(1.0, nb):
            raise ValueError(f"bin size {bin_size} does not divide [{lo}, {hi}]")
        if nbins < 2:
            raise ValueError("domain must span at least two bins per axis")
        edges.append(lo + bin_size * np.arange(nbins + 1))
    mids = np.meshgrid(*[0.5 * (e[1:] + e[:-1]) for e in edges], indexing="ij")
    centers = np.stack([mg.ravel() for mg in mids], axis=1)
    energies = pot.energy(centers)
    if dt_chain is None:
        dt_chain = bin_size ** 2 * pot.beta / (4 * pot.dim)
    return grid_chain_from_energies(energies, edges, pot.beta, dt_chain)


def steps_per_frame(chain: GridChain, sample_interval: float) -> int:
    """Whole number of chain steps closest to ``sample_interval``."""
    return max(1, int(round(sample_interval / chain.dt_chain)))


def calibrated_chain(pot: PotentialSpec, domain, bin_size, sample_interval):
    """Grid chain whose step divides ``sample_interval`` exactly.

    The step count per frame is the whole number nearest to
    ``sample_interval`` over the diffusion-matched step, and the chain time
    step is then set to ``sample_interval / frame_steps``.

    Returns
    -------
    chain : GridChain
    frame_steps : int
    """
    if not sample_interval > 0:
        raise ValueError("sample_interval must be positive")
    base = build_grid_chain(pot, domain, bin_size)
    frame_steps = steps_per_frame(base, sample_interval)
    chain = GridChain(base.bin_centers, base.edges, base.P, base.stationary,
                      sample_interval / frame_steps, base.energies)
    return chain, frame_steps


def _init_states(chain, init_region):
    region = np.asarray(init_region, dtype=float)
    if region.ndim == 1:
        region = region[None, :]
    ok = np.ones(chain.n_states, dtype=bool)
    grids = np.meshgrid(*[np.arange(e.size - 1) for e in chain.edges], indexing="ij")
    for axis, (lo, hi) in enumerate(region):
        e = chain.edges[axis]
        k = grids[axis].ravel()
        ok &= (e[k + 1] > lo) & (e[k] < hi)
    states = np.flatnonzero(ok)
    if states.size == 0:
        raise DataError("initial region does not intersect any bin")
    return states


def simulate_chain(chain: GridChain, n_traj, traj_len_steps, init_region, seed=0,
                   frame_steps=1, dt=None) -> TrajectorySet:
    """Sample independent trajectories of the chain.

    Parameters
    ----------
    chain : GridChain
    n_traj : int
    traj_len_steps : int
        Frames per trajectory, including the starting frame.
    init_region : (lo, hi) or per-axis sequence of (lo, hi)
        Starting bins are drawn uniformly among bins overlapping it.
    seed : int
        Trajectory ``k`` draws from its own stream spawned from ``seed``.
    frame_steps : int
        Chain steps between stored frames. Sampling uses ``P**frame_steps``
        directly, which gives the same process as stepping the chain.
    dt : float, optional
        Time per stored frame; ``frame_steps * chain.dt_chain`` by default.

    Returns
    -------
    TrajectorySet
        Frames are bin-centre coordinates.
    """
    if n_traj < 1 or traj_len_steps < 1:
        raise ValueError("need at least one trajectory of at least one frame")
    starts = _init_states(chain, init_region)
    cum = np.cumsum(chain.transition_matrix(frame_steps), axis=1)
    cum[:, -1] = 1.0
    streams = np.random.SeedSequence(seed).spawn(n_traj)
    draws = np.stack([np.random.default_rng(s).random(traj_len_steps) for s in streams])
    states = np.empty((n_traj, traj_len_steps), dtype=np.int64)
    states[:, 0] = starts[np.minimum((draws[:, 0] * starts.size).astype(np.int64),
                                     starts.size - 1)]
    for t in range(1, traj_len_steps):
        rows = cum[states[:, t - 1]]
        states[:, t] = np.minimum((rows < draws[:, t, None]).sum(axis=1), chain.n_states - 1)
    if dt is None:
        dt = frame_steps * chain.dt_chain
    trajs = [chain.bin_centers[s] for s in states]
    return TrajectorySet(trajs, dt, [f"traj{k}" for k in range(n_traj)])


@dataclass(frozen=True, eq=False)
class ReferenceSpectrum:
    """Exact leading spectrum of ``P**lag_steps``.

    ``eigenfunctions`` are pi-orthonormal and the first is constant.
    """

    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray
    stationary: np.ndarray
    timescales: np.ndarray
    lag_time: float


def reference_spectrum(chain: GridChain, k, lag_steps=1) -> ReferenceSpectrum:
    """Dense eigendecomposition of ``D^1/2 P D^-1/2`` raised to ``lag_steps``.

    Parameters
    ----------
    k : int
        Number of leading (largest) eigenvalues to return.
    lag_steps : int
        Lag in chain steps.
    """
    if not 1 <= k <= chain.n_states:
        raise ValueError("k must lie in [1, n_states]")
    pi = chain.stationary
    sq = np.sqrt(pi)
    S = sq[:, None] * chain.P / sq[None, :]
    S = 0.5 * (S + S.T)
    evals, vecs = np.linalg.eigh(S)
    order = np.argsort(evals)[::-1][:k]
    lam1 = evals[order]
    psi = vecs[:, order] / sq[:, None]
    # first eigenfunction is the constant; fix remaining signs for determinism
    for j in range(k):
        i = np.argmax(np.abs(psi[:, j]))
        if psi[i, j] < 0:
            psi[:, j] = -psi[:, j]
    lam = lam1 ** int(lag_steps)
    lam[0] = 1.0
    lag_time = lag_steps * chain.dt_chain
    ts = np.full(k, np.inf)
    with np.errstate(divide="ignore"):
        inside = (np.abs(lam) > 0) & (np.abs(lam) < 1)
        ts[inside] = -lag_time / np.log(np.abs(lam[inside]))
    ts[lam == 0] = 0.0
    return ReferenceSpectrum(lam, psi, pi.copy(), ts, lag_time)


def exact_covariances(chain: GridChain, basis, lag_steps=1) -> CovarianceBundle:
    """Population ``C(0)`` and ``C(tau)`` of ``basis`` under the stationary chain."""
    chi = basis.evaluate(chain.bin_centers)
    pi = chain.stationary
    C0 = chi.T @ (chi * pi[:, None])
    Pt = chain.transition_matrix(lag_steps)
    Ct = chi.T @ (pi[:, None] * (Pt @ chi))
    return CovarianceBundle(0.5 * (C0 + C0.T), Ct, "exact", 0, int(lag_steps))
