"""Koopman model estimation, Koopman reweighting and spectral analysis.

Three estimators are provided, all working in a decorrelated basis (PCA
whitened features plus the constant function):

* ``estimate_nonreversible``: ``K = C(0)^-1 C(tau)`` from direct estimates.
  Unbiased for off-equilibrium data, possibly complex spectrum.
* ``estimate_symmetrized``: forward/backward averaged covariances. Real
  spectrum but biased unless the data are equilibrium samples.
* ``estimate_reversible``: reweights frames to equilibrium with the
  stationary vector of the nonreversible model, then symmetrizes the
  reweighted covariances. Real spectrum with modulus at most one.
"""

import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .basis import (
    DEFAULT_EPS0,
    BasisSet,
    DecorrelatedBasis,
    IndicatorBasis,
    apply_decorrelation,
    basis_from_config,
    fit_decorrelation,
)
from .errors import DataError, NumericalError
from .trajectories import LagPairView, TrajectorySet, lag_pairs

__all__ = [
    "KoopmanModel",
    "WeightVector",
    "SpectralDecomposition",
    "BootstrapResult",
    "estimate",
    "estimate_nonreversible",
    "estimate_symmetrized",
    "estimate_reversible",
    "koopman_reweight",
    "msm_transition_matrix",
    "spectral_decomposition",
    "implied_timescales",
    "equilibrium_expectation",
    "rayleigh_trace",
    "propagate",
    "bootstrap_timescales",
    "variational_eigs",
    "save_model",
    "load_model",
    "ESTIMATORS",
]

ESTIMATORS = ("nonreversible", "symmetrized", "reversible")

# eigenvalue of K' used for reweighting must be this close to one
REWEIGHT_TOL = 1e-6
# imaginary parts below this are roundoff for reversible models
IMAG_TOL = 1e-10
# relative size of a negative eigenvalue of the reweighted covariance that
# is treated as a genuine loss of positive semidefiniteness
PSD_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class WeightVector:
    """Equilibrium weights ``w(x) = chi(x)' u`` of the X-frames.

    Attributes
    ----------
    u : (m,) ndarray
        Coefficients in ``basis``.
    w : (N,) ndarray
        Weight of each X-frame, summing to one.
    basis : BasisSet
        Basis that ``u`` refers to.
    eigenvalue : complex
        Eigenvalue of ``C0^-1 K' C0`` that was selected (nearest to one).
    eigenvalue_residual : float
        ``||C0^-1 K' C0 u - u||``.
    gap : float
        Distance from one to the next-nearest eigenvalue. Small gaps mean
        the stationary vector is poorly determined.
    """

    u: np.ndarray
    w: np.ndarray
    basis: BasisSet
    eigenvalue: complex
    eigenvalue_residual: float
    gap: float

    @property
    def n_negative(self) -> int:
        return int(np.sum(self.w < 0))

    def __call__(self, frames) -> np.ndarray:
        """Weight function evaluated at arbitrary frames (same scale as ``w``)."""
        return self.basis.evaluate(frames) @ self.u

    def summary(self) -> dict:
        return {
            "min": float(self.w.min()),
            "max": float(self.w.max()),
            "negative_count": self.n_negative,
            "sum": float(self.w.sum()),
            "eigenvalue": float(np.real(self.eigenvalue)),
            "eigenvalue_residual": float(self.eigenvalue_residual),
            "gap": float(self.gap),
        }


@dataclass(frozen=True, eq=False)
class KoopmanModel:
    """Basis set together with the matrix ``K`` acting on its coefficients.

    For an observable ``f = c' chi`` the model predicts
    ``E[f(x_{t+tau}) | x_t = x] ~ (K c)' chi(x)``.

    Attributes
    ----------
    basis : BasisSet
        Usually a :class:`DecorrelatedBasis`.
    K : (m, m) ndarray
    lag_steps : int
    dt : float
        Time per frame.
    reversible : bool
        True when ``K`` is symmetric in ``basis`` (symmetrized and reversible
        estimators).
    estimator : str
    weights : WeightVector, optional
        Equilibrium weights used by the reversible estimator.
    pairs : LagPairView, optional
        Training features in ``basis``.
    source : LagPairView, optional
        Training features in the inner (original) basis.
    fixed_point_residual : float, optional
        ``||C0^-1 K_rev' C0 u - u||`` evaluated in the nonreversible basis.
    """

    basis: BasisSet
    K: np.ndarray
    lag_steps: int
    dt: float = 1.0
    reversible: bool = False
    estimator: str = "nonreversible"
    weights: Optional[WeightVector] = None
    pairs: Optional[LagPairView] = field(default=None, repr=False)
    source: Optional[LagPairView] = field(default=None, repr=False)
    fixed_point_residual: Optional[float] = None

    @property
    def m(self):
        return self.K.shape[0]

    @property
    def lag_time(self):
        return self.lag_steps * self.dt

    @property
    def u(self):
        return None if self.weights is None else self.weights.u

    @property
    def frame_weights(self):
        return None if self.weights is None else self.weights.w


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Eigenpairs of a Koopman model, sorted by descending modulus.

    Attributes
    ----------
    eigenvalues : (k,) ndarray
        Real for reversible models, complex otherwise.
    B_model : (m, k) ndarray
        Eigenvectors in the model basis.
    B : (m_orig, k) ndarray
        Eigenfunction coefficients in the original (inner) basis, so that
        ``psi_i(x) = chi_orig(x) @ B[:, i] + offsets[i]``.
    offsets : (k,) ndarray
        Constant part of each eigenfunction.
    timescales : (k,) ndarray
        Implied timescales in time units; ``inf`` for the stationary process
        and for non-contractive eigenvalues.
    noncontractive : (k,) bool ndarray
        Flags ``|lambda| >= 1`` beyond the first eigenvalue.
    lag_time : float
    reversible : bool
    """

    eigenvalues: np.ndarray
    B_model: np.ndarray
    B: np.ndarray
    offsets: np.ndarray
    timescales: np.ndarray
    noncontractive: np.ndarray
    lag_time: float
    reversible: bool
    inner_basis: Optional[BasisSet] = field(default=None, repr=False)

    def eigenfunctions(self, frames) -> np.ndarray:
        """Evaluate ``psi_i`` on ``frames``; returns ``(n, k)``."""
        if self.inner_basis is None:
            raise ValueError("decomposition has no basis attached")
        return self.inner_basis.evaluate(frames) @ self.B + self.offsets


def _as_pairs(data, basis, lag_steps):
    """Features in the original basis, plus the frame time step."""
    if isinstance(data, LagPairView):
        return data, 1.0
    if isinstance(data, TrajectorySet):
        return lag_pairs(data, basis, lag_steps), data.dt
    raise TypeError("expected a TrajectorySet or LagPairView")


def _transform_pairs(pairs, transform):
    return LagPairView(apply_decorrelation(transform, pairs.X),
                       apply_decorrelation(transform, pairs.Y),
                       pairs.lag_steps, pairs.n_skipped, pairs.counts)


def _inner(basis, m):
    if basis is None:
        from .basis import LinearBasis
        return LinearBasis(m)
    return basis


def _nonreversible(raw, basis, dt, eps0):
    transform = fit_decorrelation(raw.X, eps0=eps0)
    pairs = _transform_pairs(raw, transform)
    X, Y = pairs.X, pairs.Y
    K = X.T @ Y / X.shape[0]
    return KoopmanModel(DecorrelatedBasis(_inner(basis, raw.m), transform), K,
                        raw.lag_steps, dt, False, "nonreversible", pairs=pairs, source=raw)


def estimate_nonreversible(data, basis=None, lag_steps=1, eps0=DEFAULT_EPS0) -> KoopmanModel:
    """Nonreversible Koopman model from direct covariance estimates.

    Parameters
    ----------
    data : TrajectorySet or LagPairView
        Trajectories, or ready-made feature pairs in the original basis.
    basis : BasisSet, optional
        Feature map; raw coordinates when omitted.
    lag_steps : int
    eps0 : float
        Variance cutoff for the decorrelation.

    Returns
    -------
    KoopmanModel
        ``K = X'Y/N`` in the decorrelated basis, where ``X'X/N`` is the
        identity.
    """
    raw, dt = _as_pairs(data, basis, lag_steps)
    return _nonreversible(raw, basis, dt, eps0)


def estimate_symmetrized(data, basis=None, lag_steps=1, eps0=DEFAULT_EPS0) -> KoopmanModel:
    """Koopman model from forward/backward symmetrized covariances."""
    raw, dt = _as_pairs(data, basis, lag_steps)
    transform = fit_decorrelation(raw.X, Y=raw.Y, eps0=eps0)
    pairs = _transform_pairs(raw, transform)
    xy = pairs.X.T @ pairs.Y
    K = (xy + xy.T) / (2 * pairs.N)
    return KoopmanModel(DecorrelatedBasis(_inner(basis, raw.m), transform), K,
                        raw.lag_steps, dt, True, "symmetrized", pairs=pairs, source=raw)


def _phase_normalize(v):
    k = np.argmax(np.abs(v))
    return v * (np.abs(v[k]) / v[k])


def koopman_reweight(model: KoopmanModel, tol=REWEIGHT_TOL) -> WeightVector:
    """Equilibrium frame weights from the stationary vector of ``K'``.

    Solves ``C0^-1 K' C0 u = u`` for the eigenvalue nearest one (``C0`` is
    the identity in a decorrelated basis) and normalizes ``u`` so that the
    weights ``w_t = chi(x_t)' u`` of the X-frames sum to one.

    Raises
    ------
    NumericalError
        If no eigenvalue lies within ``tol`` of one, or the selected
        eigenvalue is complex.
    """
    if model.pairs is None:
        raise ValueError("model carries no training data to weight")
    X = model.pairs.X
    n = X.shape[0]
    C0 = X.T @ X / n
    M = np.linalg.solve(C0, model.K.T @ C0)
    evals, evecs = scipy.linalg.eig(M)
    dist = np.abs(evals - 1.0)
    i = int(np.argmin(dist))
    if dist[i] > tol:
        raise NumericalError(f"no eigenvalue of K' near one (closest {evals[i]:.6g}); "
                             "the basis probably cannot represent the constant function")
    if abs(evals[i].imag) > IMAG_TOL:
        raise NumericalError(f"stationary eigenvalue is complex ({evals[i]:.6g})")
    gap = float(np.min(np.delete(dist, i))) if evals.size > 1 else np.inf
    u = np.real(_phase_normalize(evecs[:, i]))
    # polish: (M - I) u = 0 together with the normalization sum(X u) = 1
    A = np.vstack([M - np.eye(M.shape[0]), X.sum(axis=0)[None, :]])
    rhs = np.zeros(A.shape[0])
    rhs[-1] = 1.0
    polished, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    if np.all(np.isfinite(polished)) and abs(polished @ X.sum(axis=0)) > 0:
        u = polished
    w = X @ u
    total = w.sum()
    if total == 0:
        raise NumericalError("stationary vector yields zero total weight")
    u = u / total
    w = w / total
    residual = float(np.linalg.norm(M @ u - u))
    n_neg = int(np.sum(w < 0))
    if n_neg:
        warnings.warn(f"Koopman reweighting produced {n_neg} negative frame weights",
                      stacklevel=2)
    return WeightVector(u, w, model.basis, complex(evals[i]), residual, gap)


def _fixed_point_residual(pairs_a, weights):
    """``||C0^-1 K_rev' C0 u - u||`` with every matrix in the basis of ``u``."""
    X, Y = pairs_a.X, pairs_a.Y
    w = weights.w
    u = weights.u
    wx, wy = X * w[:, None], Y * w[:, None]
    c0_rev = 0.5 * (X.T @ wx + Y.T @ wy)
    xwy = wx.T @ Y
    ct_rev = 0.5 * (xwy + xwy.T)
    K_rev = np.linalg.lstsq(c0_rev, ct_rev, rcond=None)[0]
    C0 = X.T @ X / X.shape[0]
    return float(np.linalg.norm(np.linalg.solve(C0, K_rev.T @ (C0 @ u)) - u))


def estimate_reversible(data, basis=None, lag_steps=1, eps0=DEFAULT_EPS0,
                        psd_tol=PSD_TOL) -> KoopmanModel:
    """Reversible Koopman model from Koopman-reweighted covariances.

    Steps: nonreversible model, Koopman reweighting, decorrelation with the
    estimated equilibrium mean and covariance (forward and backward frames),
    and finally ``K_rev = (X'WY + Y'WX)/2`` in that basis.

    Raises
    ------
    NumericalError
        When reweighting fails, or the reweighted covariance is clearly
        indefinite (caused by negative weights).
    """
    raw, dt = _as_pairs(data, basis, lag_steps)
    nonrev = _nonreversible(raw, basis, dt, eps0)
    weights = koopman_reweight(nonrev)
    w = weights.w
    transform = fit_decorrelation(raw.X, weights=w, Y=raw.Y, eps0=eps0)
    spec = transform.eigenvalues
    if spec.size and spec[-1] < -psd_tol * max(1.0, spec[0]):
        neg = w < 0
        raise NumericalError(
            f"reweighted C0 is not positive semidefinite (min eigenvalue {spec[-1]:.3e}); "
            f"{int(neg.sum())} negative weights carrying mass {w[neg].sum():.3e}")
    pairs = _transform_pairs(raw, transform)
    wx = pairs.X * w[:, None]
    xwy = wx.T @ pairs.Y
    K = 0.5 * (xwy + xwy.T)
    residual = _fixed_point_residual(nonrev.pairs, weights)
    return KoopmanModel(DecorrelatedBasis(_inner(basis, raw.m), transform), K,
                        raw.lag_steps, dt, True, "reversible", weights=weights,
                        pairs=pairs, source=raw, fixed_point_residual=residual)


def estimate(data, basis=None, lag_steps=1, estimator="reversible", eps0=DEFAULT_EPS0):
    """Dispatch to one of the three estimators by name."""
    funcs = {
        "nonreversible": estimate_nonreversible,
        "symmetrized": estimate_symmetrized,
        "reversible": estimate_reversible,
    }
    if estimator not in funcs:
        raise ValueError(f"unknown estimator {estimator!r}; choose from {ESTIMATORS}")
    return funcs[estimator](data, basis, lag_steps, eps0)


def msm_transition_matrix(model: KoopmanModel, partition: Optional[IndicatorBasis] = None,
                          return_states=False, full=False):
    """Transition matrix between partition cells implied by a Koopman model.

    The model must have been estimated on the indicator basis ``partition``.
    Each cell indicator is written in the model basis, propagated by ``K``
    and read off at every visited cell. Cells never visited by an X-frame
    are excluded (with a warning).

    Parameters
    ----------
    full : bool
        Nonreversible models only: return the rectangular matrix from cells
        visited by X-frames (rows) to every cell seen in X or Y (columns).
        It needs no renormalization and stays defined when a cell's pairs
        all lead to cells that never start a pair.

    Returns
    -------
    P : ndarray
        Row-stochastic matrix over the visited cells.
    states : ndarray, only if ``return_states``
        Indices of the visited cells; with ``full`` a pair ``(rows, cols)``.
    """
    if not isinstance(model.basis, DecorrelatedBasis):
        raise ValueError("model must use a decorrelated indicator basis")
    inner = model.basis.inner if partition is None else partition
    if not isinstance(inner, IndicatorBasis):
        raise ValueError("model was not built on an indicator basis")
    m = inner.m
    direct = model.estimator == "nonreversible" and model.source is not None
    if full:
        if not direct:
            raise ValueError("full readout needs a nonreversible model with its source pairs")
        rows = np.flatnonzero(model.source.X.sum(axis=0) > 0)
        cols = np.flatnonzero((model.source.X + model.source.Y).sum(axis=0) > 0)
        E = apply_decorrelation(model.basis.transform, np.eye(m)[rows])
        Xm = model.pairs.X
        P = E @ (Xm.T @ model.source.Y[:, cols]) / Xm.shape[0]
        return (P, (rows, cols)) if return_states else P
    if model.source is None:
        visited = np.arange(m)
    elif direct:
        visited = np.flatnonzero(model.source.X.sum(axis=0) > 0)
    else:
        visited = np.flatnonzero((model.source.X + model.source.Y).sum(axis=0) > 0)
    if visited.size < m:
        warnings.warn(f"{m - visited.size} unvisited states excluded", stacklevel=2)
    E = apply_decorrelation(model.basis.transform, np.eye(m)[visited])
    if direct:
        # K applied to each indicator observable through its values on the
        # Y-frames; equals E K c_j when the indicator lies in the basis, and
        # stays exact for states that only ever occur as Y-frames
        Xm = model.pairs.X
        P = E @ (Xm.T @ model.source.Y[:, visited]) / Xm.shape[0]
    else:
        # coefficients (in model basis) of each visited indicator
        coeffs = np.linalg.lstsq(E, np.eye(visited.size), rcond=None)[0]
        P = E @ model.K @ coeffs
    rows = P.sum(axis=1)
    if np.any(np.abs(rows) <= 1e-12):
        raise DataError("a visited state has no transitions into the visited set")
    if np.any(np.abs(rows - 1.0) > 1e-10):
        warnings.warn("transitions into unvisited states dropped; rows renormalized",
                      stacklevel=2)
    P = P / rows[:, None]
    return (P, visited) if return_states else P


def _sort_order(evals):
    idx = np.arange(evals.size)
    return np.lexsort((idx, -np.real(evals), -np.round(np.abs(evals), 13)))


def implied_timescales(eigenvalues, lag_time, return_flags=False):
    """``t_i = -lag_time / ln|lambda_i|``.

    ``|lambda| = 1`` at the first position gives ``inf`` (flagged only when
    ``|lambda| > 1 + 1e-10``); ``|lambda| >= 1`` further down also gives
    ``inf`` and is flagged as non-contractive;
    ``lambda = 0`` gives 0.

    Parameters
    ----------
    eigenvalues : array-like or SpectralDecomposition
    lag_time : float
    return_flags : bool
        Also return the non-contractive mask.
    """
    if lag_time <= 0:
        raise ValueError("lag_time must be positive")
    if isinstance(eigenvalues, SpectralDecomposition):
        eigenvalues = eigenvalues.eigenvalues
    mod = np.abs(np.atleast_1d(np.asarray(eigenvalues)))
    ts = np.empty(mod.size)
    with np.errstate(divide="ignore"):
        inside = (mod > 0) & (mod < 1)
        ts[inside] = -lag_time / np.log(mod[inside])
    ts[mod == 0] = 0.0
    ts[mod >= 1] = np.inf
    flags = mod >= 1
    if flags.size:
        # the stationary eigenvalue is one up to roundoff
        flags[0] = mod[0] > 1 + IMAG_TOL
    return (ts, flags) if return_flags else ts


def spectral_decomposition(model: KoopmanModel, k=None) -> SpectralDecomposition:
    """Eigenvalues and eigenfunctions of ``K``, sorted by descending ``|lambda|``.

    Ties in modulus are broken by descending real part, then original index.
    Eigenvectors are mapped back to the original basis and signed so that
    their largest-magnitude coefficient is real and positive.
    """
    K = np.asarray(model.K)
    if not np.all(np.isfinite(K)):
        raise NumericalError("Koopman matrix has non-finite entries")
    symmetric = model.reversible and np.allclose(K, K.T, rtol=0, atol=1e-12 * max(1, np.abs(K).max()))
    try:
        if symmetric:
            evals, evecs = scipy.linalg.eigh(0.5 * (K + K.T))
        else:
            evals, evecs = scipy.linalg.eig(K)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise NumericalError(f"eigensolver failed: {exc}") from exc
    if model.reversible and np.iscomplexobj(evals):
        if np.max(np.abs(evals.imag), initial=0) > IMAG_TOL or \
                np.max(np.abs(np.imag(_phase_cols(evecs))), initial=0) > IMAG_TOL:
            raise NumericalError("reversible model produced complex eigenvalues")
        evals, evecs = evals.real, np.real(_phase_cols(evecs))
    order = _sort_order(evals)
    if k is not None:
        order = order[:k]
    evals, evecs = evals[order], evecs[:, order]

    if isinstance(model.basis, DecorrelatedBasis):
        t = model.basis.transform
        top = evecs[:t.kept_rank]
        B = t.projection.T @ top
        offsets = -(t.mean @ B)
        if t.append_constant:
            offsets = offsets + evecs[t.kept_rank]
        inner = model.basis.inner
    else:
        B = evecs
        offsets = np.zeros(evecs.shape[1], dtype=evecs.dtype)
        inner = model.basis
    full = np.vstack([B, offsets[None, :]])
    for j in range(full.shape[1]):
        i = np.argmax(np.abs(full[:, j]))
        phase = np.abs(full[i, j]) / full[i, j] if full[i, j] != 0 else 1.0
        if not np.iscomplexobj(full):
            phase = np.real(phase)
        B[:, j] *= phase
        offsets[j] *= phase
        evecs[:, j] *= phase
    ts, flags = implied_timescales(evals, model.lag_time, return_flags=True) \
        if evals.size else (np.empty(0), np.empty(0, bool))
    return SpectralDecomposition(evals, evecs, B, offsets, ts, flags, model.lag_time,
                                 model.reversible, inner)


def _phase_cols(evecs):
    out = evecs.astype(complex)
    for j in range(out.shape[1]):
        out[:, j] = _phase_normalize(out[:, j])
    return out


def equilibrium_expectation(weights, f_values, g_values=None) -> float:
    """Weighted average ``sum_t w_t f(x_t)`` or ``sum_t w_t f(x_t) g(x_{t+tau})``.

    ``weights`` is a :class:`WeightVector` or a plain array summing to one.
    """
    w = weights.w if isinstance(weights, WeightVector) else np.asarray(weights, dtype=float)
    f = np.asarray(f_values, dtype=float)
    if f.shape[0] != w.shape[0]:
        raise ValueError("f_values must have one entry per weighted frame")
    if g_values is not None:
        g = np.asarray(g_values, dtype=float)
        if g.shape[0] != w.shape[0]:
            raise ValueError("g_values must have one entry per weighted frame")
        f = f * g
    return float(w @ f)


def rayleigh_trace(dec: SpectralDecomposition, m: int) -> float:
    """Sum of the ``m`` leading eigenvalues of a reversible model."""
    if not dec.reversible:
        raise ValueError("the Rayleigh trace is defined for reversible models only")
    if not 1 <= m <= dec.eigenvalues.size:
        raise ValueError(f"m must lie in [1, {dec.eigenvalues.size}]")
    return float(np.sum(np.real(dec.eigenvalues[:m])))


def propagate(model: KoopmanModel, coeffs, steps: int) -> np.ndarray:
    """Coefficients of ``K_tau^steps f`` for ``f = coeffs' chi``."""
    if steps < 0:
        raise ValueError("steps must be >= 0")
    c = np.asarray(coeffs, dtype=float)
    return np.linalg.matrix_power(model.K, int(steps)) @ c


def variational_eigs(C0, Ct, eps0=DEFAULT_EPS0):
    """Solve ``Ct b = lambda C0 b`` for symmetric ``Ct`` and PSD ``C0``.

    Directions with ``C0`` eigenvalue at or below ``eps0`` are discarded.

    Returns
    -------
    eigenvalues : (r,) ndarray, descending
    coefficients : (m, r) ndarray, ``C0``-orthonormal columns
    """
    C0 = 0.5 * (np.asarray(C0) + np.asarray(C0).T)
    Ct = 0.5 * (np.asarray(Ct) + np.asarray(Ct).T)
    s, q = np.linalg.eigh(C0)
    keep = s > eps0
    T = (q[:, keep] / np.sqrt(s[keep])).T
    evals, v = np.linalg.eigh(T @ Ct @ T.T)
    order = np.argsort(evals)[::-1]
    return evals[order], T.T @ v[:, order]


@dataclass(frozen=True, eq=False)
class BootstrapResult:
    """Timescale samples from trajectory bootstrapping.

    Attributes
    ----------
    samples : (n_ok, k) ndarray
        Timescales ``t_2..t_{k+1}`` of each accepted resample.
    resamples : list of ndarray
        Trajectory indices of every resample, accepted or not.
    accepted : (n_boot,) bool ndarray
    n_failed : int
        Resamples where estimation raised.
    n_rejected : int
        Resamples discarded because a reported eigenvalue was
        non-contractive.
    """

    samples: np.ndarray
    resamples: list
    accepted: np.ndarray
    n_failed: int
    n_rejected: int

    def percentiles(self, q=(5, 50, 95)) -> np.ndarray:
        return np.percentile(self.samples, q, axis=0)


def bootstrap_timescales(ts: TrajectorySet, basis, lag_steps, estimator="reversible",
                         n_boot=100, seed=0, n_timescales=3, eps0=DEFAULT_EPS0,
                         n_jobs=1) -> BootstrapResult:
    """Resample trajectories with replacement and re-estimate timescales.

    Resample ``i`` uses a generator seeded by ``(seed, i)``, so results do
    not depend on ``n_jobs``. A resample is rejected when estimation fails
    or any of the reported eigenvalues has modulus at least one.
    """
    if len(ts) < 2:
        raise DataError("bootstrapping needs at least two trajectories")
    if n_boot < 1:
        raise ValueError("n_boot must be >= 1")

    def one(i):
        rng = np.random.default_rng([seed, i])
        idx = rng.integers(0, len(ts), size=len(ts))
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                model = estimate(ts.subset(idx), basis, lag_steps, estimator, eps0)
                dec = spectral_decomposition(model)
        except (NumericalError, DataError, np.linalg.LinAlgError):
            return idx, None, "failed"
        lam = dec.eigenvalues[1:1 + n_timescales]
        if lam.size < n_timescales:
            return idx, None, "failed"
        if np.any(np.abs(lam) >= 1):
            return idx, None, "rejected"
        return idx, dec.timescales[1:1 + n_timescales], "ok"

    if n_jobs == 1:
        results = [one(i) for i in range(n_boot)]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(one, range(n_boot)))
    ok = np.array([r[2] == "ok" for r in results])
    if not ok.any():
        raise NumericalError("every bootstrap resample failed")
    samples = np.array([r[1] for r in results if r[2] == "ok"])
    return BootstrapResult(samples, [r[0] for r in results], ok,
                           sum(r[2] == "failed" for r in results),
                           sum(r[2] == "rejected" for r in results))


def save_model(model: KoopmanModel, path) -> None:
    """Write basis, decorrelation, ``K``, ``u``, lag and ``dt`` as JSON."""
    doc = {
        "estimator": model.estimator,
        "reversible": model.reversible,
        "lag_steps": model.lag_steps,
        "dt": model.dt,
        "basis": model.basis.to_config(),
        "K": model.K.tolist(),
    }
    if model.weights is not None:
        doc["u"] = model.weights.u.tolist()
        doc["u_basis"] = model.weights.basis.to_config()
    if model.fixed_point_residual is not None:
        doc["fixed_point_residual"] = model.fixed_point_residual
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)


def load_model(path) -> KoopmanModel:
    """Inverse of :func:`save_model` (training data is not restored)."""
    with open(path) as fh:
        doc = json.load(fh)
    basis = basis_from_config(doc["basis"])
    weights = None
    if "u" in doc:
        u = np.array(doc["u"])
        weights = WeightVector(u, np.empty(0), basis_from_config(doc["u_basis"]), 1.0,
                               np.nan, np.nan)
    return KoopmanModel(basis, np.array(doc["K"]), int(doc["lag_steps"]), float(doc["dt"]),
                        bool(doc["reversible"]), doc["estimator"], weights,
                        fixed_point_residual=doc.get("fixed_point_residual"))
