"""Experiment configuration, per-n observables and slope fits."""
from __future__ import annotations

import json
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import linregress

from . import quadrature as quad
from .cauchy import DEFAULT_LADDER
from .edgeworth import (edgeworth_params, meixner_gap, meixner_gap_grid, shape_observable,
                        support_window, v_n)
from .functionals import l1_distance, relative_entropy, relative_fisher
from .measures import Atomic, Measure, Semicircle, from_literal, standardize
from .subordination import build_truncated, power_density


class ConfigError(ValueError):
    pass


DEFAULT_MEASURE = {"type": "two_atom", "p": 0.8}


@dataclass
class ExperimentConfig:
    """Deterministic experiment description (no seeds are involved).

    ``resolution`` is the number of Chebyshev nodes per density table,
    ``outer_panels``/``fisher_panels`` control the functional quadrature.
    """

    measure: dict = field(default_factory=lambda: dict(DEFAULT_MEASURE))
    n_list: list = field(default_factory=lambda: [8, 16, 32, 64, 128])
    resolution: int = 256
    eps_ladder: list = field(default_factory=lambda: list(DEFAULT_LADDER))
    density_method: str = "boundary"
    outer_panels: int = 16
    fisher_panels: int = 32
    eps1_scale: float = 1.0
    out_dir: str = "freeclt_out"

    def __post_init__(self):
        if not isinstance(self.n_list, (list, tuple)) or len(self.n_list) == 0:
            raise ConfigError("n_list must be a nonempty list of integers")
        ns = [int(n) for n in self.n_list]
        if any(n != m for n, m in zip(ns, self.n_list)):
            raise ConfigError("n_list entries must be integers")
        if ns[0] < 2 or any(b <= a for a, b in zip(ns[:-1], ns[1:])):
            raise ConfigError("n_list must be strictly increasing with n >= 2")
        self.n_list = ns
        if int(self.resolution) < 64:
            raise ConfigError("resolution must be at least 64")
        if self.density_method not in ("boundary", "richardson"):
            raise ConfigError(f"unknown density_method {self.density_method!r}")
        if not isinstance(self.measure, dict):
            raise ConfigError("measure must be a literal object")

    @classmethod
    def from_dict(cls, data):
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        return cls(**data)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(data)

    def to_dict(self):
        return asdict(self)

    def build_measure(self):
        """The standardized measure described by the config."""
        mu = from_literal(self.measure)
        return standardize(mu)


def thread_count():
    try:
        return max(1, int(os.environ.get("FREECLT_THREADS", "1")))
    except ValueError:
        return 1


def map_over_n(func, ns):
    """Ordered map over ``n`` values, threaded up to ``FREECLT_THREADS``."""
    workers = min(thread_count(), len(ns))
    if workers <= 1:
        return [func(n) for n in ns]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, ns))


def fit_slope(xs, ys):
    """Least-squares line through ``(log x, log y)``.

    Returns ``(slope, intercept, r2)``.  Nonpositive ``y`` values are
    dropped with a warning; fewer than 4 usable points is an error.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape:
        raise ValueError("xs and ys must have the same length")
    keep = (ys > 0) & (xs > 0) & np.isfinite(ys)
    if not keep.all():
        warnings.warn(f"fit_slope: dropped {int((~keep).sum())} nonpositive point(s)",
                      RuntimeWarning, stacklevel=2)
    if keep.sum() < 4:
        raise ValueError("fit_slope needs at least 4 positive points")
    fit = linregress(np.log(xs[keep]), np.log(ys[keep]))
    return float(fit.slope), float(fit.intercept), float(fit.rvalue ** 2)


def power_grid_density(mu: Measure, n, config: ExperimentConfig):
    """``mu_n`` as a grid density (exact semicircle short-cut for ``mu = w``)."""
    if isinstance(mu, Semicircle):
        return mu, None
    pd = power_density(mu, n, resolution=config.resolution, method=config.density_method)
    return pd.grid, pd


def truncation_info(mu: Measure, n):
    if isinstance(mu, Atomic) and mu.locations.size >= 2:
        ctx = build_truncated(mu, n)
        return ctx, ctx.eta_n, ctx.tail_mass
    return None, 0.0, 0.0


def rate_row(mu: Measure, n, config: ExperimentConfig):
    """All observables at one ``n``."""
    dens, _ = power_grid_density(mu, n, config)
    w = Semicircle(1.0)
    if isinstance(mu, Semicircle):
        D = Phi = L1 = 0.0
        D_err = Phi_err = L1_err = 0.0
    else:
        d = relative_entropy(dens, panels=config.outer_panels)
        f = relative_fisher(dens, panels=config.fisher_panels)
        l1 = l1_distance(dens, w)
        D, Phi, L1 = d.value, f.value, l1.value
        D_err, Phi_err, L1_err = d.estimated_abs_error, f.estimated_abs_error, l1.estimated_abs_error
    params = edgeworth_params(mu.moments(4), n)
    ctx, eta, tail = truncation_info(mu, n)
    window = support_window(params, eta, config.eps1_scale)
    grid = meixner_gap_grid(params, window)
    gap, _ = meixner_gap(ctx if ctx is not None else mu, params, grid)
    return {
        "n": n, "D": D, "nD": n * D, "D_err": D_err,
        "Phi_rel": Phi, "nPhi_rel": n * Phi, "Phi_err": Phi_err,
        "L1": L1, "sqrt_n_L1": np.sqrt(n) * L1, "L1_err": L1_err,
        "meixner_gap": gap, "eta_n": eta, "tail_mass": tail,
    }


RATE_COLUMNS = ["n", "D", "nD", "D_err", "Phi_rel", "nPhi_rel", "Phi_err", "L1", "sqrt_n_L1",
                "L1_err", "meixner_gap", "eta_n", "tail_mass"]

# slope bands for skewed laws; symmetric laws get the one-sided upper bound
SLOPE_BANDS = {"D": (-1.25, -0.75), "Phi_rel": (-1.25, -0.75), "L1": (-0.65, -0.35),
               "meixner_gap": (-1.35, -0.65)}
SYMMETRIC_UPPER = {"D": -1.0, "Phi_rel": -1.0, "L1": -0.5}
GATED = ("D", "Phi_rel", "L1")
DEGENERATE_LEVEL = 1e-10


@dataclass
class RateTable:
    rows: list
    fits: list
    m3: float

    def column(self, name):
        return np.array([r[name] for r in self.rows], dtype=float)

    def limits(self):
        """Rescaled values at the largest ``n`` against their limits."""
        last = self.rows[-1]
        m3 = self.m3
        out = {}
        for col, target in (("nD", m3 * m3 / 6.0), ("nPhi_rel", m3 * m3),
                            ("sqrt_n_L1", 2.0 * abs(m3) / np.pi)):
            rel = abs(last[col] - target) / target if target > 0 else None
            out[col] = {"value": last[col], "limit": target, "relative_error": rel}
        return out


def fit_rates(rows, m3, symmetric_tol=1e-10):
    ns = np.array([r["n"] for r in rows], dtype=float)
    fits = []
    for name in ("D", "Phi_rel", "L1", "meixner_gap"):
        ys = np.array([r[name] for r in rows], dtype=float)
        entry = {"quantity": name}
        if np.all(np.abs(ys) < DEGENERATE_LEVEL):
            entry.update(status="degenerate", slope=None, intercept=None, r2=None, ok=True)
            fits.append(entry)
            continue
        try:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                slope, icpt, r2 = fit_slope(ns, ys)
            entry.update(slope=slope, intercept=icpt, r2=r2,
                         dropped_points=len(caught) > 0)
        except ValueError as exc:
            entry.update(status="unfit", reason=str(exc), slope=None, intercept=None, r2=None,
                         ok=False)
            fits.append(entry)
            continue
        if abs(m3) < symmetric_tol and name in SYMMETRIC_UPPER:
            ok = slope <= SYMMETRIC_UPPER[name]
            entry["band"] = [None, SYMMETRIC_UPPER[name]]
        else:
            lo, hi = SLOPE_BANDS[name]
            ok = lo <= slope <= hi
            entry["band"] = [lo, hi]
        entry.update(status="fit", ok=bool(ok), low_r2=bool(r2 < 0.9))
        fits.append(entry)
    return fits


def compute_rate_table(config: ExperimentConfig):
    mu = config.build_measure()
    if not (isinstance(mu, (Atomic, Semicircle))):
        raise ConfigError("rates need an atomic or semicircle measure")
    rows = map_over_n(lambda n: rate_row(mu, n, config), config.n_list)
    m3 = mu.moment(3)
    return RateTable(rows, fit_rates(rows, m3), m3)


def density_table(mu: Measure, n, config: ExperimentConfig):
    """Columns ``x, p_n(x), v_n(x - a_n)`` and the weighted difference."""
    params = edgeworth_params(mu.moments(4), n)
    if isinstance(mu, Semicircle):
        lo, hi = -2.0, 2.0
        x = quad.chebyshev_nodes(lo, hi, config.resolution)
        p = mu.density(x)
        flagged = np.zeros(x.size, dtype=bool)
    else:
        pd = power_density(mu, n, resolution=config.resolution, method=config.density_method)
        x, p, flagged = pd.grid.nodes, pd.grid.values, pd.flagged
    shifted = x - params.a
    v = v_n(params, shifted)
    weight = np.maximum(4.0 - (params.e * shifted) ** 2, 0.0) ** 1.5
    return {"x": x, "p_n": p, "v_n": v, "weighted_residual": np.abs(p - v) * weight,
            "flagged": flagged.astype(int)}


DENSITY_COLUMNS = ["x", "p_n", "v_n", "weighted_residual", "flagged"]


def format_float(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def write_csv(path, columns, rows):
    """Write rows (dicts) with fixed columns and 17-significant-digit floats."""
    with open(path, "w", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(format_float(row[c]) for c in columns) + "\n")


def write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else None
    return obj


