"""Trajectory containers, CSV input/output and time-lagged pair extraction."""

import os
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .errors import DataError

__all__ = [
    "TrajectorySet",
    "LagPairView",
    "load_trajectories",
    "save_trajectories",
    "lag_pairs",
    "lag_steps_from_time",
]


@dataclass(frozen=True)
class TrajectorySet:
    """Independent trajectories sharing a coordinate dimension and time step.

    Parameters
    ----------
    trajectories : list of (T_k, d) ndarray
        Frames of each trajectory, one row per frame.
    dt : float
        Physical time between consecutive frames.
    labels : list of str, optional
        Identifier per trajectory.
    """

    trajectories: List[np.ndarray]
    dt: float = 1.0
    labels: Optional[List[str]] = None

    def __post_init__(self):
        trajs = []
        for traj in self.trajectories:
            traj = np.asarray(traj, dtype=np.float64)
            if traj.ndim == 1:
                traj = traj[:, None]
            if traj.ndim != 2 or traj.shape[0] < 1 or traj.shape[1] < 1:
                raise ValueError("each trajectory must be a non-empty (T, d) array")
            trajs.append(traj)
        if not trajs:
            raise ValueError("TrajectorySet needs at least one trajectory")
        dims = {t.shape[1] for t in trajs}
        if len(dims) != 1:
            raise ValueError(f"trajectories disagree on dimension: {sorted(dims)}")
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise ValueError("dt must be positive and finite")
        if self.labels is not None and len(self.labels) != len(trajs):
            raise ValueError("labels must match the number of trajectories")
        object.__setattr__(self, "trajectories", trajs)
        object.__setattr__(self, "dt", float(self.dt))

    def __len__(self):
        return len(self.trajectories)

    @property
    def dim(self) -> int:
        return self.trajectories[0].shape[1]

    @property
    def lengths(self) -> np.ndarray:
        return np.array([t.shape[0] for t in self.trajectories])

    def subset(self, indices: Sequence[int]) -> "TrajectorySet":
        """Trajectories at ``indices`` (repeats allowed, as in bootstrapping)."""
        labels = None if self.labels is None else [self.labels[i] for i in indices]
        return TrajectorySet([self.trajectories[i] for i in indices], self.dt, labels)

    def concatenate(self, other: "TrajectorySet") -> "TrajectorySet":
        if other.dim != self.dim or not np.isclose(other.dt, self.dt, rtol=1e-12):
            raise ValueError("cannot concatenate sets with different dim or dt")
        labels = None
        if self.labels is not None and other.labels is not None:
            labels = list(self.labels) + list(other.labels)
        return TrajectorySet(self.trajectories + other.trajectories, self.dt, labels)


@dataclass(frozen=True)
class LagPairView:
    """Stacked features of frames ``t`` (``X``) and ``t + lag_steps`` (``Y``)."""

    X: np.ndarray
    Y: np.ndarray
    lag_steps: int = 1
    n_skipped: int = 0
    counts: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=np.float64))
        Y = np.atleast_2d(np.asarray(self.Y, dtype=np.float64))
        if X.shape != Y.shape:
            raise ValueError(f"X and Y shapes differ: {X.shape} vs {Y.shape}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def N(self) -> int:
        return self.X.shape[0]

    @property
    def m(self) -> int:
        return self.X.shape[1]


def _parse_header(line):
    # "# dt = 0.002" style metadata; anything else after '#' is a comment
    body = line.lstrip("#").strip()
    if "=" in body:
        key, _, value = body.partition("=")
        return key.strip().lower(), value.strip()
    return None, None


def _read_csv_blocks(path):
    blocks, current, meta = [], [], {}
    arity = None
    with open(path, "r") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if line.startswith("#"):
                key, value = _parse_header(line)
                if key is not None:
                    meta[key] = value
                continue
            if not line:
                if current:
                    blocks.append(current)
                    current = []
                continue
            tokens = line.split(",")
            try:
                row = [float(tok) for tok in tokens]
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric token in row {line!r}") from None
            if arity is None:
                arity = len(row)
            elif len(row) != arity:
                raise DataError(
                    f"{path}:{lineno}: expected {arity} columns, found {len(row)}"
                )
            current.append(row)
    if current:
        blocks.append(current)
    if not blocks:
        raise DataError(f"{path}: no frames found (empty file)")
    return [np.array(b, dtype=np.float64) for b in blocks], meta


def load_trajectories(path, format=None, dt=None) -> TrajectorySet:
    """Read trajectories from a CSV file or a manifest of CSV files.

    In a CSV, each row is one frame and a blank line separates trajectories.
    A manifest is a plain text file listing one CSV path per line (relative
    paths are resolved against the manifest's directory).

    Parameters
    ----------
    path : str or path-like
    format : {"csv", "manifest"}, optional
        Inferred from the suffix when omitted (``.csv`` means CSV).
    dt : float, optional
        Frame time step. Overrides a ``# dt = ...`` header line; defaults to 1.
    """
    path = os.fspath(path)
    if not os.path.exists(path):
        raise DataError(f"{path}: file does not exist")
    if format is None:
        format = "csv" if path.lower().endswith(".csv") else "manifest"
    if format == "csv":
        trajs, meta = _read_csv_blocks(path)
        labels = [f"{os.path.basename(path)}#{i}" for i in range(len(trajs))]
    elif format == "manifest":
        base = os.path.dirname(os.path.abspath(path))
        with open(path) as fh:
            entries = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
        if not entries:
            raise DataError(f"{path}: manifest lists no files")
        trajs, labels, meta = [], [], {}
        for entry in entries:
            sub = entry if os.path.isabs(entry) else os.path.join(base, entry)
            if not os.path.exists(sub):
                raise DataError(f"{path}: listed file {entry!r} does not exist")
            blocks, sub_meta = _read_csv_blocks(sub)
            meta = meta or sub_meta
            trajs.extend(blocks)
            labels.extend([entry] * len(blocks) if len(blocks) == 1 else
                          [f"{entry}#{i}" for i in range(len(blocks))])
    else:
        raise ValueError(f"unknown trajectory format {format!r}")
    if dt is None:
        dt = float(meta["dt"]) if "dt" in meta else 1.0
    dims = {t.shape[1] for t in trajs}
    if len(dims) != 1:
        raise DataError(f"{path}: trajectories have inconsistent column counts {sorted(dims)}")
    return TrajectorySet(trajs, dt, labels)


def save_trajectories(ts: TrajectorySet, path) -> None:
    """Write ``ts`` as a single blank-line separated CSV with a ``dt`` header."""
    with open(path, "w") as fh:
        fh.write(f"# dt = {ts.dt!r}\n")
        for k, traj in enumerate(ts.trajectories):
            if k:
                fh.write("\n")
            for row in traj:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")


def lag_steps_from_time(lag_time: float, dt: float, tol: float = 1e-9) -> int:
    """Convert a physical lag time into a whole number of frames."""
    steps = lag_time / dt
    rounded = int(round(steps))
    if rounded < 1 or abs(steps - rounded) > tol * max(1.0, abs(steps)):
        raise DataError(f"lag time {lag_time} is not a positive integer multiple of dt={dt}")
    return rounded


def lag_pairs(ts: TrajectorySet, basis=None, lag_steps: int = 1) -> LagPairView:
    """Build time-lagged feature pairs, never crossing trajectory boundaries.

    Parameters
    ----------
    ts : TrajectorySet
    basis : BasisSet, optional
        Feature map applied to every frame; raw coordinates when omitted.
    lag_steps : int
        Lag in frames, at least 1.

    Returns
    -------
    LagPairView
        ``counts`` holds the number of pairs contributed by each trajectory.
    """
    lag_steps = int(lag_steps)
    if lag_steps < 1:
        raise ValueError("lag_steps must be >= 1")
    xs, ys, counts = [], [], []
    skipped = 0
    for traj in ts.trajectories:
        n = traj.shape[0] - lag_steps
        if n <= 0:
            skipped += 1
            counts.append(0)
            continue
        feats = traj if basis is None else basis.evaluate(traj)
        xs.append(feats[:n])
        ys.append(feats[lag_steps:])
        counts.append(n)
    if not xs:
        raise DataError(f"no usable pairs at this lag ({lag_steps} frames)")
    if skipped:
        warnings.warn(f"{skipped} trajectories shorter than lag+1 frames were skipped",
                      stacklevel=2)
    return LagPairView(np.concatenate(xs), np.concatenate(ys), lag_steps, skipped,
                       np.array(counts))
