"""Instantaneous and time-lagged covariance estimators.

All bundles store normalized matrices: direct and symmetrized estimates
carry the ``1/N`` factor, weighted estimates use weights summing to one.
"""

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "CovarianceBundle",
    "direct_covariances",
    "symmetrized_covariances",
    "weighted_reversible_covariances",
    "accumulate",
    "write_bundle_csv",
]

ESTIMATORS = ("direct", "symmetrized", "weighted_reversible", "exact")


@dataclass(frozen=True, eq=False)
class CovarianceBundle:
    """Paired covariance matrices ``C0 = C(0)`` and ``Ct = C(tau)``.

    ``weight_total`` is the mass the bundle represents when partial bundles
    are combined: the pair count for unweighted estimators, the sum of the
    weights for weighted ones.
    """

    C0: np.ndarray
    Ct: np.ndarray
    estimator: str
    N: int
    lag_steps: int
    weights_id: Optional[str] = None
    weight_total: Optional[float] = None

    def __post_init__(self):
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if self.weight_total is None:
            object.__setattr__(self, "weight_total", float(self.N))

    @property
    def m(self):
        return self.C0.shape[0]


def _xy(pairs):
    return pairs.X, pairs.Y


def direct_covariances(pairs) -> CovarianceBundle:
    """``C0 = X'X / N`` and ``Ct = X'Y / N``."""
    X, Y = _xy(pairs)
    n = X.shape[0]
    if n < 1:
        raise ValueError("need at least one pair")
    C0 = X.T @ X / n
    return CovarianceBundle(0.5 * (C0 + C0.T), X.T @ Y / n, "direct", n, pairs.lag_steps)


def symmetrized_covariances(pairs) -> CovarianceBundle:
    """Forward/backward averaged estimates; ``Ct`` is exactly symmetric."""
    X, Y = _xy(pairs)
    n = X.shape[0]
    if n < 1:
        raise ValueError("need at least one pair")
    C0 = (X.T @ X + Y.T @ Y) / (2 * n)
    xy = X.T @ Y
    Ct = (xy + xy.T) / (2 * n)
    return CovarianceBundle(0.5 * (C0 + C0.T), Ct, "symmetrized", n, pairs.lag_steps)


def weighted_reversible_covariances(pairs, w, weights_id=None, normalized=True):
    """Reweighted, time-symmetrized estimates.

    ``C0 = (X'WX + Y'WY)/2`` and ``Ct = (X'WY + Y'WX)/2`` with ``W = diag(w)``.

    Parameters
    ----------
    pairs : LagPairView
    w : (N,) array
        Per-pair weights. Must sum to one unless ``normalized=False``, in which
        case the matrices are divided by ``sum(w)`` and the bundle remembers
        the total for later accumulation.
    """
    X, Y = _xy(pairs)
    w = np.asarray(w, dtype=np.float64).ravel()
    if w.size != X.shape[0]:
        raise ValueError("weight vector length must equal the pair count")
    if not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite")
    total = float(w.sum())
    if normalized and abs(total - 1.0) > 1e-8:
        raise ValueError(f"weights sum to {total}, expected 1")
    scale = 1.0 if normalized else 1.0 / total
    wx = X * w[:, None]
    wy = Y * w[:, None]
    C0 = 0.5 * scale * (X.T @ wx + Y.T @ wy)
    xwy = wx.T @ Y
    Ct = 0.5 * scale * (xwy + xwy.T)
    C0 = 0.5 * (C0 + C0.T)
    if np.any(w < 0):
        n_neg = int(np.sum(w < 0))
        warnings.warn(f"{n_neg} negative weights in reweighted covariance", stacklevel=2)
        lam_min = np.linalg.eigvalsh(C0)[0]
        if lam_min < -1e-12 * max(1.0, np.abs(C0).max()):
            warnings.warn(f"weighted C0 is not positive semidefinite (min eigenvalue "
                          f"{lam_min:.3e})", stacklevel=2)
    return CovarianceBundle(C0, Ct, "weighted_reversible", X.shape[0], pairs.lag_steps,
                            weights_id, total)


def _fsum_stack(mats: Sequence[np.ndarray]) -> np.ndarray:
    # correctly rounded elementwise sum, hence independent of order
    stacked = np.stack(mats).reshape(len(mats), -1)
    return np.array([math.fsum(col) for col in stacked.T]).reshape(mats[0].shape)


def accumulate(partials: Sequence[CovarianceBundle]) -> CovarianceBundle:
    """Combine partial bundles into the estimate over their union.

    Each partial enters with weight ``weight_total / sum(weight_total)``; the
    sum is correctly rounded so the result does not depend on order.
    """
    partials = list(partials)
    if not partials:
        raise ValueError("nothing to accumulate")
    first = partials[0]
    for p in partials[1:]:
        if p.C0.shape != first.C0.shape or p.Ct.shape != first.Ct.shape:
            raise ValueError("partial bundles have different shapes")
        if p.estimator != first.estimator or p.lag_steps != first.lag_steps:
            raise ValueError("partial bundles mix estimators or lags")
    if len(partials) == 1:
        return first
    masses = [p.weight_total for p in partials]
    total = math.fsum(masses)
    C0 = _fsum_stack([p.C0 * (mass / total) for p, mass in zip(partials, masses)])
    Ct = _fsum_stack([p.Ct * (mass / total) for p, mass in zip(partials, masses)])
    return CovarianceBundle(C0, Ct, first.estimator, sum(p.N for p in partials),
                            first.lag_steps, first.weights_id, total)


def write_bundle_csv(bundle: CovarianceBundle, path) -> None:
    """Dump a bundle as ``matrix,row,col,value`` lines (debugging aid)."""
    with open(path, "w") as fh:
        fh.write(f"# estimator = {bundle.estimator}\n# N = {bundle.N}\n"
                 f"# lag_steps = {bundle.lag_steps}\n")
        fh.write("matrix,row,col,value\n")
        for name, mat in (("C0", bundle.C0), ("Ct", bundle.Ct)):
            for i, j in np.ndindex(*mat.shape):
                fh.write(f"{name},{i},{j},{mat[i, j]!r}\n")
