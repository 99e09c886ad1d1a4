"""Basis (feature) sets and the decorrelation transform.

Every basis maps an ``(n, d)`` array of frames to an ``(n, m)`` feature
array.  The decorrelation transform whitens a fitted feature set, dropping
directions whose (optionally weighted) variance falls below ``eps0``, and
appends the constant function so that stationary weights are exactly
representable.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DataError

__all__ = [
    "BasisSet",
    "LinearBasis",
    "IndicatorBasis",
    "GaussianBasis",
    "ConstantAugmentedBasis",
    "DecorrelatedBasis",
    "DecorrelationTransform",
    "evaluate",
    "make_gaussian_basis",
    "fit_decorrelation",
    "apply_decorrelation",
    "basis_from_config",
    "DEFAULT_EPS0",
]

DEFAULT_EPS0 = 1e-10


def _frames(frames, input_dim):
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim == 1:
        frames = frames[:, None] if input_dim == 1 else frames[None, :]
    if frames.shape[1] != input_dim:
        raise ValueError(f"frames have {frames.shape[1]} columns, basis expects {input_dim}")
    return frames


class BasisSet:
    """Base class. Subclasses define ``input_dim``, ``m`` and ``_evaluate``."""

    input_dim: int
    m: int

    def evaluate(self, frames) -> np.ndarray:
        return self._evaluate(_frames(frames, self.input_dim))

    def _evaluate(self, frames):
        raise NotImplementedError

    def to_config(self) -> dict:
        raise NotImplementedError(f"{type(self).__name__} is not serializable")


def evaluate(basis: BasisSet, frames) -> np.ndarray:
    """Evaluate ``basis`` on each row of ``frames``; returns ``(n, m)``."""
    return basis.evaluate(frames)


@dataclass(frozen=True, eq=False)
class LinearBasis(BasisSet):
    """Coordinates themselves, optionally shifted by ``mean``."""

    input_dim: int
    mean: Optional[np.ndarray] = None

    @property
    def m(self):
        return self.input_dim

    def _evaluate(self, frames):
        if self.mean is None:
            return frames.copy()
        return frames - np.asarray(self.mean, dtype=np.float64)

    @classmethod
    def fit(cls, frames):
        """Mean-free linear basis using the empirical mean of ``frames``."""
        frames = np.atleast_2d(np.asarray(frames, dtype=np.float64))
        return cls(frames.shape[1], frames.mean(axis=0))

    def to_config(self):
        cfg = {"kind": "linear", "input_dim": self.input_dim}
        if self.mean is not None:
            cfg["mean"] = [float(v) for v in np.ravel(self.mean)]
        return cfg


@dataclass(frozen=True, eq=False)
class IndicatorBasis(BasisSet):
    """Characteristic functions of a partition of the coordinate space.

    The partition is either a rectangular grid given by per-axis ``edges``
    (half-open cells, the last edge of each axis inclusive) or an arbitrary
    ``assign`` callable mapping frames to integer cell labels in
    ``[0, n_states)`` (negative labels mean out of domain).
    """

    edges: Optional[Sequence[np.ndarray]] = None
    assign: Optional[Callable] = field(default=None, repr=False)
    n_states: Optional[int] = None

    def __post_init__(self):
        if (self.edges is None) == (self.assign is None):
            raise ValueError("give exactly one of edges or assign")
        if self.edges is not None:
            edges = [np.asarray(e, dtype=np.float64) for e in self.edges]
            for e in edges:
                if e.ndim != 1 or e.size < 2 or np.any(np.diff(e) <= 0):
                    raise ValueError("edges must be strictly increasing with >= 2 entries")
            object.__setattr__(self, "edges", edges)
            object.__setattr__(self, "n_states", int(np.prod([e.size - 1 for e in edges])))
        elif self.n_states is None:
            raise ValueError("n_states is required with an assign function")

    @classmethod
    def discrete(cls, n_states):
        """Indicators of integer states ``0..n_states-1`` stored in one column."""
        return cls(edges=[np.arange(n_states + 1) - 0.5])

    @property
    def input_dim(self):
        return len(self.edges) if self.edges is not None else 1

    @property
    def m(self):
        return self.n_states

    def labels(self, frames) -> np.ndarray:
        frames = _frames(frames, self.input_dim) if self.edges is not None else frames
        if self.assign is not None:
            lab = np.asarray(self.assign(frames), dtype=np.int64)
        else:
            lab = np.zeros(frames.shape[0], dtype=np.int64)
            inside = np.ones(frames.shape[0], dtype=bool)
            for axis, e in enumerate(self.edges):
                x = frames[:, axis]
                idx = np.searchsorted(e, x, side="right") - 1
                idx[x == e[-1]] = e.size - 2
                inside &= (idx >= 0) & (idx < e.size - 1)
                lab = lab * (e.size - 1) + np.clip(idx, 0, e.size - 2)
            lab[~inside] = -1
        bad = np.flatnonzero((lab < 0) | (lab >= self.n_states))
        if bad.size:
            raise DataError(f"frame {bad[0]} lies outside the indicator partition")
        return lab

    def evaluate(self, frames):
        if self.assign is not None:
            frames = np.asarray(frames)
        lab = self.labels(frames)
        out = np.zeros((lab.size, self.n_states))
        out[np.arange(lab.size), lab] = 1.0
        return out

    def to_config(self):
        if self.edges is None:
            return super().to_config()
        return {"kind": "indicator", "edges": [[float(v) for v in e] for e in self.edges]}


@dataclass(frozen=True, eq=False)
class GaussianBasis(BasisSet):
    """Ridge Gaussians ``exp(-(w_i . x + b_i)**2)``."""

    weights: np.ndarray
    offsets: np.ndarray
    seed: Optional[int] = None

    def __post_init__(self):
        w = np.atleast_2d(np.asarray(self.weights, dtype=np.float64))
        b = np.asarray(self.offsets, dtype=np.float64).ravel()
        if w.shape[0] != b.size:
            raise ValueError("weights and offsets disagree on the number of functions")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "offsets", b)

    @property
    def input_dim(self):
        return self.weights.shape[1]

    @property
    def m(self):
        return self.offsets.size

    def _evaluate(self, frames):
        return np.exp(-(frames @ self.weights.T + self.offsets) ** 2)

    def subset(self, indices):
        idx = np.asarray(indices)
        return GaussianBasis(self.weights[idx], self.offsets[idx])

    def to_config(self):
        return {
            "kind": "gaussian",
            "weights": self.weights.tolist(),
            "offsets": self.offsets.tolist(),
        }


def make_gaussian_basis(count, input_dim=1, seed=0, weight_range=(-1.0, 1.0),
                        offset_range=(0.0, 1.0)) -> GaussianBasis:
    """Random ridge Gaussians with uniformly drawn parameters.

    Uses numpy's PCG64 generator seeded with ``seed``, so parameters are
    reproducible across runs and platforms.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    w = rng.uniform(weight_range[0], weight_range[1], size=(count, input_dim))
    b = rng.uniform(offset_range[0], offset_range[1], size=count)
    return GaussianBasis(w, b, seed=seed)


@dataclass(frozen=True, eq=False)
class ConstantAugmentedBasis(BasisSet):
    """``inner`` followed by the constant function."""

    inner: BasisSet

    @property
    def input_dim(self):
        return self.inner.input_dim

    @property
    def m(self):
        return self.inner.m + 1

    def evaluate(self, frames):
        f = self.inner.evaluate(frames)
        return np.hstack([f, np.ones((f.shape[0], 1))])

    def to_config(self):
        return {"kind": "augmented", "inner": self.inner.to_config()}


@dataclass(frozen=True, eq=False)
class DecorrelationTransform:
    """Whitening map ``z = projection @ (chi - mean)``, optionally plus ``1``.

    Attributes
    ----------
    mean : (m,) ndarray
    projection : (d', m) ndarray
    eps0 : float
        Variance cutoff used when the transform was fitted.
    append_constant : bool
    eigenvalues : (m,) ndarray
        Spectrum of the fitted covariance, descending. Useful to diagnose
        indefinite weighted covariances.
    """

    mean: np.ndarray
    projection: np.ndarray
    eps0: float = DEFAULT_EPS0
    append_constant: bool = True
    eigenvalues: Optional[np.ndarray] = None

    @property
    def kept_rank(self) -> int:
        return self.projection.shape[0]

    @property
    def m_in(self) -> int:
        return self.mean.size

    @property
    def m_out(self) -> int:
        return self.kept_rank + int(self.append_constant)

    def to_config(self):
        return {
            "mean": self.mean.tolist(),
            "projection": self.projection.tolist(),
            "eps0": self.eps0,
            "append_constant": self.append_constant,
        }


def _symmetric_inv_sqrt(a):
    s, q = np.linalg.eigh(0.5 * (a + a.T))
    return (q / np.sqrt(s)) @ q.T


def fit_decorrelation(X, weights=None, eps0=DEFAULT_EPS0, Y=None, append_constant=True,
                      refine=True) -> DecorrelationTransform:
    """Fit a PCA whitening transform of the feature matrix ``X``.

    Parameters
    ----------
    X : (N, m) array
        Feature values of the frames.
    weights : (N,) array, optional
        Frame weights summing to one; uniform ``1/N`` when omitted. Negative
        entries are tolerated (they arise from reweighting) but may make the
        covariance indefinite; only eigenvalues above ``eps0`` are kept.
    eps0 : float
        Eigenvalue cutoff on the covariance.
    Y : (N, m) array, optional
        Time-lagged partner features. When given, mean and covariance are the
        forward/backward averages ``(X + Y)/2`` and ``(X'WX + Y'WY)/2``.
    append_constant : bool
        Append the constant function to the output.
    refine : bool
        Re-whiten once using the covariance of the transformed data. This
        removes roundoff amplified by small retained eigenvalues.

    Returns
    -------
    DecorrelationTransform
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    n, m = X.shape
    if n < 2:
        raise ValueError("need at least two frames to fit a decorrelation")
    if weights is None:
        w = np.full(n, 1.0 / n)
    else:
        w = np.asarray(weights, dtype=np.float64).ravel()
        if w.size != n:
            raise ValueError("weights must have one entry per frame")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        if abs(w.sum() - 1.0) > 1e-8:
            raise ValueError("weights must sum to one")
    parts = [X] if Y is None else [X, np.asarray(Y, dtype=np.float64)]
    scale = 1.0 / len(parts)

    def moments(mats, center):
        mean = scale * sum(w @ a for a in mats)
        if not center:
            mean = np.zeros(mats[0].shape[1])
        cov = scale * sum((a - mean).T @ ((a - mean) * w[:, None]) for a in mats)
        return mean, 0.5 * (cov + cov.T)

    mean, cov = moments(parts, True)
    s, q = np.linalg.eigh(cov)
    order = np.argsort(s)[::-1]
    s, q = s[order], q[:, order]
    keep = s > eps0
    projection = (q[:, keep] / np.sqrt(s[keep])).T
    if keep.any() and refine:
        _, cov_z = moments([(a - mean) @ projection.T for a in parts], False)
        projection = _symmetric_inv_sqrt(cov_z) @ projection
    if not keep.any() and not append_constant:
        raise DataError("basis degenerate: no direction with variance above eps0")
    return DecorrelationTransform(mean, projection, eps0, append_constant, s)


def apply_decorrelation(t: DecorrelationTransform, X) -> np.ndarray:
    """Map features through ``t``; rows become ``[projection (chi - mean), 1]``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != t.m_in:
        raise ValueError(f"expected {t.m_in} feature columns, got {X.shape[1]}")
    z = (X - t.mean) @ t.projection.T
    if t.append_constant:
        z = np.hstack([z, np.ones((z.shape[0], 1))])
    return z


@dataclass(frozen=True, eq=False)
class DecorrelatedBasis(BasisSet):
    """Composite basis: ``inner`` features passed through a decorrelation."""

    inner: BasisSet
    transform: DecorrelationTransform

    @property
    def input_dim(self):
        return self.inner.input_dim

    @property
    def m(self):
        return self.transform.m_out

    def evaluate(self, frames):
        return apply_decorrelation(self.transform, self.inner.evaluate(frames))

    def to_config(self):
        return {"kind": "decorrelated", "inner": self.inner.to_config(),
                "transform": self.transform.to_config()}


def basis_from_config(cfg: dict) -> BasisSet:
    """Rebuild a basis from the dict produced by ``to_config`` or a CLI spec.

    A Gaussian spec may give either explicit ``weights``/``offsets`` or
    ``count``/``seed`` (and optionally ``weight_range``/``offset_range``).
    """
    kind = cfg.get("kind")
    if kind == "gaussian":
        if "weights" in cfg:
            return GaussianBasis(np.array(cfg["weights"]), np.array(cfg["offsets"]))
        return make_gaussian_basis(int(cfg["count"]), int(cfg.get("input_dim", 1)),
                                   int(cfg.get("seed", 0)),
                                   tuple(cfg.get("weight_range", (-1.0, 1.0))),
                                   tuple(cfg.get("offset_range", (0.0, 1.0))))
    if kind == "linear":
        mean = cfg.get("mean")
        return LinearBasis(int(cfg["input_dim"]), None if mean is None else np.array(mean))
    if kind == "indicator":
        return IndicatorBasis(edges=[np.array(e) for e in cfg["edges"]])
    if kind == "augmented":
        return ConstantAugmentedBasis(basis_from_config(cfg["inner"]))
    if kind == "decorrelated":
        t = cfg["transform"]
        transform = DecorrelationTransform(np.array(t["mean"]),
                                           np.array(t["projection"]).reshape(-1, len(t["mean"])),
                                           float(t["eps0"]), bool(t["append_constant"]))
        return DecorrelatedBasis(basis_from_config(cfg["inner"]), transform)
    raise ValueError(f"unknown basis kind {kind!r}")
