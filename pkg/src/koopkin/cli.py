"""Command-line driver: simulate, estimate, reweight, oracle, compare, bootstrap.

Every command reads an INI-style configuration (``[section]`` headers with
``key = value`` lines) assembled from an optional preset, any number of
config files and ``--set section.key=value`` overrides, in that order. The
resolved configuration is written as ``config.ini`` next to the outputs, and
all numbers are written with round-trip precision.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure.
"""

import argparse
import configparser
import csv
import os
import sys
import warnings

import numpy as np

from .basis import ConstantAugmentedBasis, IndicatorBasis, LinearBasis, make_gaussian_basis
from .errors import DataError, NumericalError
from .koopman import (
    ESTIMATORS,
    bootstrap_timescales,
    estimate,
    koopman_reweight,
    save_model,
    spectral_decomposition,
    variational_eigs,
)
from .simulate import (
    PotentialSpec,
    calibrated_chain,
    exact_covariances,
    reference_spectrum,
    simulate_chain,
)
from .trajectories import lag_pairs, lag_steps_from_time, load_trajectories, save_trajectories

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3

SECTIONS = ("potential", "grid", "simulation", "data", "basis", "estimation", "reweight",
            "oracle", "bootstrap")

PRESETS = {
    "1d": {
        "potential": {"kind": "well1d", "beta": "0.3", "c": "-0.3, 0.5, 1.0, 1.5, 2.3",
                      "u": "5.0, 0.0, 4.0, 0.5, 5.0", "softening": "0.001"},
        "grid": {"domain": "0, 2", "bin_size": "0.02"},
        "simulation": {"n_traj": "500", "length": "0.2", "sample_interval": "0.002",
                       "init_region": "0, 0.2", "seed": "0"},
        "data": {"trajectories": ""},
        "basis": {"kind": "gaussian", "count": "100", "seed": "0",
                  "weight_range": "-1, 1", "offset_range": "0, 1"},
        "estimation": {"estimator": "reversible", "lags": "0.01, 0.02, 0.03, 0.04, 0.05",
                       "eps0": "1e-10", "n_eigen": "4"},
        "reweight": {"lag": "0.01", "bins": "100", "range": "0, 2", "wells": "threshold",
                     "border": "1.0"},
        "oracle": {"k": "4"},
        "bootstrap": {"n_boot": "100", "seed": "0", "lag": "0.01", "n_timescales": "3",
                      "n_jobs": "1"},
    },
    "2d": {
        "potential": {"kind": "triplewell2d", "beta": "0.5"},
        "grid": {"domain": "-3, 3; -2.6, 3.4", "bin_size": "0.2"},
        "simulation": {"n_traj": "8000", "length": "1.25", "sample_interval": "0.05",
                       "init_region": "-2, -1.5; -1.5, 2.5", "seed": "0"},
        "data": {"trajectories": ""},
        "basis": {"kind": "gaussian", "count": "100", "seed": "0",
                  "weight_range": "-1, 1", "offset_range": "0, 1"},
        "estimation": {"estimator": "reversible", "lags": "0.05, 0.1, 0.15, 0.2",
                       "eps0": "1e-10", "n_eigen": "4"},
        "reweight": {"lag": "0.05", "bins": "30", "range": "-3, 3; -2.6, 3.4",
                     "wells": "nearest", "centers": "-1, 0; 1, 0; 0, 1.6666666666666667"},
        "oracle": {"k": "4"},
        "bootstrap": {"n_boot": "100", "seed": "0", "lag": "0.05", "n_timescales": "3",
                      "n_jobs": "1"},
    },
}


class UsageError(Exception):
    """Bad command line or configuration; exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------- config

def load_config(preset=None, files=(), overrides=()) -> configparser.ConfigParser:
    """Merge preset, config files and ``section.key=value`` overrides."""
    cfg = configparser.ConfigParser(interpolation=None)
    for name in SECTIONS:
        cfg.add_section(name)
    if preset is not None:
        if preset not in PRESETS:
            raise UsageError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        cfg.read_dict(PRESETS[preset])
    for path in files:
        if not os.path.exists(path):
            raise UsageError(f"config file {path} does not exist")
        try:
            with open(path) as fh:
                cfg.read_file(fh)
        except configparser.Error as exc:
            raise UsageError(f"{path}: {exc}") from None
    for item in overrides:
        key, sep, value = item.partition("=")
        section, dot, option = key.strip().partition(".")
        if not sep or not dot:
            raise UsageError(f"override {item!r} is not of the form section.key=value")
        if not cfg.has_section(section):
            cfg.add_section(section)
        cfg.set(section, option, value.strip())
    return cfg


def write_config(cfg, path, command):
    snap = configparser.ConfigParser(interpolation=None)
    snap.read_dict({"run": {"command": command}})
    snap.read_dict({s: dict(cfg.items(s)) for s in cfg.sections()})
    with open(path, "w") as fh:
        snap.write(fh)


def _get(cfg, section, key):
    if not cfg.has_option(section, key) or cfg.get(section, key).strip() == "":
        raise UsageError(f"missing configuration value {section}.{key}")
    return cfg.get(section, key).strip()


def _num(cfg, section, key, kind=float):
    raw = _get(cfg, section, key)
    try:
        return kind(raw)
    except ValueError:
        raise UsageError(f"{section}.{key} = {raw!r} is not a valid {kind.__name__}") from None


def _floats(cfg, section, key):
    raw = _get(cfg, section, key)
    try:
        return [float(v) for v in raw.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{section}.{key} = {raw!r} is not a list of numbers") from None


def _boxes(cfg, section, key):
    """``lo, hi; lo, hi`` per axis."""
    raw = _get(cfg, section, key)
    try:
        boxes = [[float(v) for v in part.split(",")] for part in raw.split(";") if part.strip()]
    except ValueError:
        raise UsageError(f"{section}.{key} = {raw!r} is not a list of ranges") from None
    if not boxes or any(len(b) != 2 for b in boxes):
        raise UsageError(f"{section}.{key} needs 'lo, hi' pairs separated by ';'")
    return boxes


def _potential(cfg):
    kind = _get(cfg, "potential", "kind")
    beta = _num(cfg, "potential", "beta")
    try:
        if kind == "well1d":
            return PotentialSpec("well1d", beta, tuple(_floats(cfg, "potential", "c")),
                                 tuple(_floats(cfg, "potential", "u")),
                                 _num(cfg, "potential", "softening"))
        return PotentialSpec(kind, beta)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _chain(cfg):
    pot = _potential(cfg)
    interval = _num(cfg, "simulation", "sample_interval")
    try:
        return calibrated_chain(pot, _boxes(cfg, "grid", "domain"),
                                _num(cfg, "grid", "bin_size"), interval)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _basis(cfg, dim):
    kind = _get(cfg, "basis", "kind")
    if kind == "gaussian":
        try:
            return make_gaussian_basis(_num(cfg, "basis", "count", int), dim,
                                       _num(cfg, "basis", "seed", int),
                                       tuple(_floats(cfg, "basis", "weight_range")),
                                       tuple(_floats(cfg, "basis", "offset_range")))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if kind == "linear":
        return LinearBasis(dim)
    if kind == "indicator":
        boxes = _boxes(cfg, "basis", "range")
        bins = _num(cfg, "basis", "bins", int)
        if len(boxes) != dim:
            raise UsageError("basis.range must give one range per coordinate")
        return IndicatorBasis(edges=[np.linspace(lo, hi, bins + 1) for lo, hi in boxes])
    raise UsageError(f"unknown basis kind {kind!r}")


def _estimator(cfg):
    name = _get(cfg, "estimation", "estimator")
    if name not in ESTIMATORS:
        raise UsageError(f"unknown estimator {name!r}; choose from {', '.join(ESTIMATORS)}")
    return name


def _trajectories(cfg):
    path = _get(cfg, "data", "trajectories")
    return load_trajectories(path)


def _steps(lag, dt):
    return lag_steps_from_time(lag, dt)


# ---------------------------------------------------------------- output

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for row in rows:
            out.writerow([_fmt(v) for v in row])


def _read_csv(path):
    if not os.path.exists(path):
        raise DataError(f"{path}: file does not exist")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file")
    return rows[0], rows[1:]


SPECTRUM_HEADER = ["lag", "index", "eigenvalue_re", "eigenvalue_im", "timescale",
                   "noncontractive", "status"]


def _spectrum_rows(lag, evals, timescales, flags):
    for i, (lam, t, f) in enumerate(zip(evals, timescales, flags)):
        yield [lag, i, float(np.real(lam)), float(np.imag(lam)), float(t), bool(f), "ok"]


def _histogram_edges(cfg, dim):
    boxes = _boxes(cfg, "reweight", "range")
    bins = _num(cfg, "reweight", "bins", int)
    if len(boxes) != dim:
        raise UsageError("reweight.range must give one range per coordinate")
    return [np.linspace(lo, hi, bins + 1) for lo, hi in boxes]


def _histogram(frames, weights, edges):
    hist, _ = np.histogramdd(frames, bins=edges, weights=weights)
    return hist.ravel()


def _bin_centers(edges):
    mids = np.meshgrid(*[0.5 * (e[1:] + e[:-1]) for e in edges], indexing="ij")
    return np.stack([m.ravel() for m in mids], axis=1)


def _wells(cfg, frames):
    """Well label per frame and the well names."""
    rule = _get(cfg, "reweight", "wells")
    if rule == "threshold":
        border = _num(cfg, "reweight", "border")
        return (frames[:, 0] >= border).astype(int), ["I", "II"]
    if rule == "nearest":
        centers = np.array(_boxes(cfg, "reweight", "centers"))
        if centers.shape[1] != frames.shape[1]:
            raise UsageError("reweight.centers must have one coordinate per dimension")
        d2 = ((frames[:, None, :] - centers[None]) ** 2).sum(axis=-1)
        names = ["I", "II", "III", "IV", "V", "VI"][:len(centers)]
        return np.argmin(d2, axis=1), names
    raise UsageError(f"unknown well rule {rule!r}")


def _linear_directions(dec, n):
    """Rows ``(index, coefficient...)`` of the leading eigenvectors in raw coordinates."""
    for i in range(min(n, dec.B.shape[1])):
        yield i, np.real(dec.B[:, i])


# ---------------------------------------------------------------- commands

def cmd_simulate(cfg, out):
    chain, frame_steps = _chain(cfg)
    interval = _num(cfg, "simulation", "sample_interval")
    length = _num(cfg, "simulation", "length")
    frames = int(round(length / interval)) + 1
    region = _boxes(cfg, "simulation", "init_region")
    ts = simulate_chain(chain, _num(cfg, "simulation", "n_traj", int), frames, region,
                        seed=_num(cfg, "simulation", "seed", int), frame_steps=frame_steps,
                        dt=interval)
    save_trajectories(ts, os.path.join(out, "trajectories.csv"))
    return EXIT_OK


def cmd_estimate(cfg, out):
    ts = _trajectories(cfg)
    basis = _basis(cfg, ts.dim)
    name = _estimator(cfg)
    eps0 = _num(cfg, "estimation", "eps0")
    n_eigen = _num(cfg, "estimation", "n_eigen", int)
    lags = _floats(cfg, "estimation", "lags")
    linear = isinstance(basis, LinearBasis)
    spectrum, summaries, directions = [], [], []
    os.makedirs(os.path.join(out, "models"), exist_ok=True)
    n_ok = 0
    for lag in lags:
        try:
            steps = _steps(lag, ts.dt)
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                model = estimate(ts, basis, steps, name, eps0)
                dec = spectral_decomposition(model, n_eigen)
            for w in caught:
                print(f"warning (lag {lag!r}): {w.message}", file=sys.stderr)
        except (DataError, NumericalError) as exc:
            spectrum.append([lag, "", "", "", "", "", f"failed: {exc}"])
            continue
        n_ok += 1
        spectrum.extend(_spectrum_rows(lag, dec.eigenvalues, dec.timescales,
                                       dec.noncontractive))
        save_model(model, os.path.join(out, "models", f"lag_{steps}.json"))
        if model.weights is not None:
            s = model.weights.summary()
            summaries.append([lag, s["min"], s["max"], s["negative_count"], s["sum"],
                              abs(s["sum"] - 1.0) <= 1e-10, s["eigenvalue_residual"],
                              s["gap"], model.fixed_point_residual])
        if linear:
            directions.extend([lag, i, *coef] for i, coef in _linear_directions(dec, n_eigen))
    _write_csv(os.path.join(out, "spectrum.csv"), SPECTRUM_HEADER, spectrum)
    if summaries:
        _write_csv(os.path.join(out, "weights_summary.csv"),
                   ["lag", "min", "max", "negative_count", "sum", "sum_is_one",
                    "eigenvalue_residual", "gap", "fixed_point_residual"], summaries)
    if linear:
        _write_csv(os.path.join(out, "eigenvectors.csv"),
                   ["lag", "index"] + [f"c{j}" for j in range(ts.dim)], directions)
    return EXIT_OK if n_ok else EXIT_NUMERICAL


def cmd_reweight(cfg, out):
    ts = _trajectories(cfg)
    basis = _basis(cfg, ts.dim)
    steps = _steps(_num(cfg, "reweight", "lag"), ts.dt)
    model = estimate(ts, basis, steps, "nonreversible", _num(cfg, "estimation", "eps0"))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        weights = koopman_reweight(model)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    raw = lag_pairs(ts, None, steps)
    rows = []
    k = 0
    for traj, count in enumerate(raw.counts):
        for frame in range(count):
            rows.append([traj, frame, weights.w[k]])
            k += 1
    _write_csv(os.path.join(out, "weights.csv"), ["trajectory", "frame", "weight"], rows)

    edges = _histogram_edges(cfg, ts.dim)
    weighted = _histogram(raw.X, weights.w, edges)
    counted = _histogram(raw.X, None, edges) / raw.N
    centers = _bin_centers(edges)
    _write_csv(os.path.join(out, "histogram.csv"),
               ["bin"] + [f"x{j}" for j in range(ts.dim)] + ["weighted", "counted"],
               ([i, *centers[i], weighted[i], counted[i]] for i in range(centers.shape[0])))
    labels, names = _wells(cfg, raw.X)
    wsum = np.bincount(labels, weights=weights.w, minlength=len(names))
    csum = np.bincount(labels, minlength=len(names)) / raw.N
    _write_csv(os.path.join(out, "wells.csv"), ["well", "weighted", "counted"],
               ([names[i], wsum[i], csum[i]] for i in range(len(names))))
    s = weights.summary()
    _write_csv(os.path.join(out, "weights_summary.csv"), list(s), [list(s.values())])
    return EXIT_OK


def cmd_oracle(cfg, out):
    chain, frame_steps = _chain(cfg)
    interval = _num(cfg, "simulation", "sample_interval")
    k = _num(cfg, "oracle", "k", int)
    lags = _floats(cfg, "estimation", "lags")
    rows, directions = [], []
    linear = _get(cfg, "basis", "kind") == "linear"
    dim = chain.bin_centers.shape[1]
    for lag in lags:
        steps = _steps(lag, interval) * frame_steps
        ref = reference_spectrum(chain, k, steps)
        flags = np.zeros(k, dtype=bool)
        rows.extend(_spectrum_rows(lag, ref.eigenvalues, ref.timescales, flags))
        if linear:
            ec = exact_covariances(chain, ConstantAugmentedBasis(LinearBasis(dim)), steps)
            _, V = variational_eigs(ec.C0, ec.Ct)
            for i in range(min(k, V.shape[1])):
                coef = V[:dim, i]
                j = np.argmax(np.abs(np.append(coef, V[dim, i])))
                sign = np.sign(np.append(coef, V[dim, i])[j]) or 1.0
                directions.append([lag, i, *(sign * coef)])
    _write_csv(os.path.join(out, "spectrum.csv"), SPECTRUM_HEADER, rows)
    if linear:
        _write_csv(os.path.join(out, "eigenvectors.csv"),
                   ["lag", "index"] + [f"c{j}" for j in range(dim)], directions)

    ref = reference_spectrum(chain, k, frame_steps)
    _write_csv(os.path.join(out, "stationary.csv"),
               [f"x{j}" for j in range(dim)] + ["pi"] + [f"psi{i + 1}" for i in range(k)],
               ([*chain.bin_centers[s], ref.stationary[s], *ref.eigenfunctions[s]]
                for s in range(chain.n_states)))
    edges = _histogram_edges(cfg, dim)
    hist = _histogram(chain.bin_centers, chain.stationary, edges)
    centers = _bin_centers(edges)
    _write_csv(os.path.join(out, "histogram.csv"),
               ["bin"] + [f"x{j}" for j in range(dim)] + ["probability"],
               ([i, *centers[i], hist[i]] for i in range(centers.shape[0])))
    labels, names = _wells(cfg, chain.bin_centers)
    psum = np.bincount(labels, weights=chain.stationary, minlength=len(names))
    _write_csv(os.path.join(out, "wells.csv"), ["well", "probability"],
               ([names[i], psum[i]] for i in range(len(names))))
    return EXIT_OK


def _spectrum_table(path):
    header, rows = _read_csv(path)
    if header != SPECTRUM_HEADER:
        raise DataError(f"{path}: unexpected columns {header}")
    table = {}
    for row in rows:
        if row[6] != "ok":
            continue
        table[(float(row[0]), int(row[1]))] = (float(row[2]), float(row[3]), float(row[4]))
    return table


def _probabilities(path):
    """Weighted column of a reweighting output, or the exact probabilities."""
    header, rows = _read_csv(path)
    for col in ("weighted", "probability"):
        if col in header:
            return np.array([float(r[header.index(col)]) for r in rows])
    raise DataError(f"{path}: no 'weighted' or 'probability' column")


def _angle(a, b):
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    c = abs(a @ b) / (np.linalg.norm(a) * np.linalg.norm(b))
    return float(np.degrees(np.arccos(min(1.0, c))))


def cmd_compare(est_dir, ref_dir, out):
    rows = []
    sp_est, sp_ref = (os.path.join(d, "spectrum.csv") for d in (est_dir, ref_dir))
    if os.path.exists(sp_est) and os.path.exists(sp_ref):
        est = _spectrum_table(sp_est)
        ref = _spectrum_table(sp_ref)
        for key in sorted(est):
            if key not in ref:
                continue
            lag, index = key
            t_est, t_ref = est[key][2], ref[key][2]
            if index == 0 or not np.isfinite(t_ref) or t_ref == 0:
                continue
            rows.append(["timescale_rel_error", lag, index, t_est, t_ref,
                         (t_est - t_ref) / t_ref])
    ev_est, ev_ref = (os.path.join(d, "eigenvectors.csv") for d in (est_dir, ref_dir))
    if os.path.exists(ev_est) and os.path.exists(ev_ref):
        h1, r1 = _read_csv(ev_est)
        h2, r2 = _read_csv(ev_ref)
        if h1 != h2:
            raise DataError("eigenvector files have different columns")
        # in the estimate, index 0 is the constant; compare the slow modes
        ref_dirs = {(float(r[0]), int(r[1])): [float(v) for v in r[2:]] for r in r2}
        for r in r1:
            key = (float(r[0]), int(r[1]))
            if key[1] >= 1 and key in ref_dirs:
                vec = [float(v) for v in r[2:]]
                rows.append(["direction_angle_deg", key[0], key[1], "", "",
                             _angle(vec, ref_dirs[key])])
    for name, label in (("wells.csv", "wells"), ("histogram.csv", "histogram")):
        p_est, p_ref = os.path.join(est_dir, name), os.path.join(ref_dir, name)
        if not (os.path.exists(p_est) and os.path.exists(p_ref)):
            continue
        a, b = _probabilities(p_est), _probabilities(p_ref)
        if a.size != b.size:
            raise DataError(f"{name}: estimate and reference do not share a binning")
        rows.append([f"tv_distance_{label}", "", "", "", "", 0.5 * float(np.abs(a - b).sum())])
    if not rows:
        raise DataError(f"{est_dir} and {ref_dir} share no comparable outputs")
    _write_csv(os.path.join(out, "compare.csv"),
               ["metric", "lag", "index", "estimate", "reference", "value"], rows)
    return EXIT_OK


def cmd_bootstrap(cfg, out):
    ts = _trajectories(cfg)
    basis = _basis(cfg, ts.dim)
    steps = _steps(_num(cfg, "bootstrap", "lag"), ts.dt)
    n_ts = _num(cfg, "bootstrap", "n_timescales", int)
    res = bootstrap_timescales(ts, basis, steps, _estimator(cfg),
                               n_boot=_num(cfg, "bootstrap", "n_boot", int),
                               seed=_num(cfg, "bootstrap", "seed", int), n_timescales=n_ts,
                               eps0=_num(cfg, "estimation", "eps0"),
                               n_jobs=_num(cfg, "bootstrap", "n_jobs", int))
    names = [f"t{i + 2}" for i in range(n_ts)]
    rows, k = [], 0
    for i, ok in enumerate(res.accepted):
        if ok:
            rows.append([i, "ok", *res.samples[k]])
            k += 1
        else:
            rows.append([i, "rejected"] + [""] * n_ts)
    _write_csv(os.path.join(out, "bootstrap_samples.csv"), ["resample", "status"] + names, rows)
    q = (5, 50, 95)
    pct = res.percentiles(q)
    _write_csv(os.path.join(out, "bootstrap_summary.csv"), ["percentile"] + names,
               ([q[i], *pct[i]] for i in range(len(q))))
    print(f"{int(res.accepted.sum())} of {res.accepted.size} resamples accepted "
          f"({res.n_failed} failed, {res.n_rejected} non-contractive)", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------- entry point

def build_parser():
    parser = _Parser(prog="koopkin", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, helptext in (("simulate", "sample trajectories of a benchmark grid chain"),
                           ("estimate", "spectrum of a Koopman model at each lag"),
                           ("reweight", "equilibrium frame weights and histograms"),
                           ("oracle", "exact spectrum and stationary distribution"),
                           ("bootstrap", "trajectory bootstrap of implied timescales")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--preset", choices=sorted(PRESETS))
        p.add_argument("-c", "--config", action="append", default=[],
                       help="INI config file (repeatable, later files win)")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override one configuration value")
        p.add_argument("-o", "--out", required=True, help="output directory")
        if name in ("estimate", "reweight", "bootstrap"):
            p.add_argument("-t", "--trajectories", help="trajectory CSV or manifest")
        if name in ("estimate", "bootstrap"):
            p.add_argument("--estimator", help=f"one of {', '.join(ESTIMATORS)}")
        if name in ("simulate", "bootstrap"):
            p.add_argument("--seed", type=int)
    p = sub.add_parser("compare", help="errors of an estimate against an oracle")
    p.add_argument("estimate_dir")
    p.add_argument("oracle_dir")
    p.add_argument("-o", "--out", required=True, help="output directory")
    return parser


COMMANDS = {"simulate": cmd_simulate, "estimate": cmd_estimate, "reweight": cmd_reweight,
            "oracle": cmd_oracle, "bootstrap": cmd_bootstrap}


def run(argv=None) -> int:
    """Parse ``argv`` and run the command; exceptions propagate."""
    args = build_parser().parse_args(argv)
    os.makedirs(args.out, exist_ok=True)
    if args.command == "compare":
        return cmd_compare(args.estimate_dir, args.oracle_dir, args.out)
    overrides = list(args.set)
    if getattr(args, "trajectories", None):
        overrides.append(f"data.trajectories={args.trajectories}")
    if getattr(args, "estimator", None):
        overrides.append(f"estimation.estimator={args.estimator}")
    if getattr(args, "seed", None) is not None:
        section = "simulation" if args.command == "simulate" else "bootstrap"
        overrides.append(f"{section}.seed={args.seed}")
    cfg = load_config(args.preset, args.config, overrides)
    if args.command in ("estimate", "bootstrap"):
        _estimator(cfg)
    write_config(cfg, os.path.join(args.out, "config.ini"), args.command)
    return COMMANDS[args.command](cfg, args.out)


def main(argv=None) -> int:
    try:
        return run(argv)
    except UsageError as exc:
        print(f"koopkin: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"koopkin: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"koopkin: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
