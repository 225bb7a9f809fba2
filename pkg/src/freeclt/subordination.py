"""Free additive convolution powers through the subordination equation.

For ``mu`` and ``n >= 2`` the subordination function ``Z`` solves
``z = n Z - (n - 1) F_mu(Z)`` and ``F_{mu^{boxplus n}}(z) = F_mu(Z(z))``.
The normalized power ``mu_n`` (law of the sum divided by ``sqrt(n)``) has
``G_{mu_n}(z) = sqrt(n) G_mu(Z(sqrt(n) z))``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from . import quadrature as quad
from .cauchy import TauRepresentation, UpperHalfPoint, extract_tau
from ._branch import edge_sqrt
from .measures import Atomic, GridDensity, Measure, MeasureError

log = logging.getLogger(__name__)


class SolverError(ArithmeticError):
    pass


def _transform_pair(mu):
    """Callables ``F`` and ``F'`` valid on the closed upper half-plane."""
    def F(w):
        return 1.0 / mu.cauchy(w)

    def dF(w):
        g = mu.cauchy(w)
        return -mu.cauchy_derivative(w) / (g * g)

    return F, dF


@dataclass
class SubordinationSolution:
    """Solved values of ``Z`` on a point set, with diagnostics."""

    n: int
    points: np.ndarray
    Z_values: np.ndarray
    residuals: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    residual_history: list = field(default_factory=list, repr=False)

    @property
    def all_converged(self):
        return bool(np.all(self.converged))


# averaged Picard maps are still self-maps with the same fixed point; the
# floor keeps them from stalling
LAMBDA_FLOOR = 0.125


POLY_START_MAX_ATOMS = 24


def _roundoff_floor(n, w, Fw, z):
    """Smallest residual double precision can certify (terms of size n|w| cancel)."""
    return 16.0 * np.finfo(float).eps * (n * np.abs(w) + (n - 1) * np.abs(Fw) + np.abs(z))


def semicircle_start(mu, n, z):
    """Subordination function of the variance-matched semicircle.

    Exact when ``F_mu(w) = w - m_1 - s^2/(w - m_1)``; a good starting point
    for every finite-variance ``mu`` and always inside ``Im w >= Im z``.
    """
    m1 = mu.moment(1)
    var = mu.moment(2) - m1 * m1
    zeta = z - n * m1
    return m1 + 0.5 * (zeta + edge_sqrt(zeta, 2.0 * np.sqrt((n - 1) * var)))


def solve_Z_many(mu: Measure, n, z, tol=1e-13, max_iter=500, start="auto",
                 newton_switch=1e-1, keep_history=False):
    """Vectorized solve of ``n Z - (n - 1) F(Z) = z`` for points ``Im z > 0``.

    Damped Picard iteration ``w <- (1 - lam) w + lam (z + (n-1) F(w)) / n``
    (``lam`` halved when the residual grows) maps the upper half-plane into
    itself because ``Im F(w) >= Im w``, but contracts only at rate about
    ``(n-1)/n``.  Once the relative residual is below ``newton_switch`` a
    Newton step is tried first and kept only if it lowers the residual and
    stays in ``Im w >= Im z``.

    ``start`` is ``"auto"`` (the upper half-plane root of the polynomial
    form for atomic measures with few atoms, otherwise ``"semicircle"``),
    ``"semicircle"`` (see :func:`semicircle_start`), ``"z"`` or an array of
    initial values.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if tol < 1e-13:
        raise ValueError("tol must be >= 1e-13")
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if np.any(z.imag <= 0):
        raise ValueError("solve_Z needs points in the open upper half-plane")
    F, dF = _transform_pair(mu)
    if isinstance(start, str):
        if start == "auto":
            if isinstance(mu, Atomic) and mu.locations.size <= POLY_START_MAX_ATOMS:
                w = _atomic_boundary_Z(mu, n, z)
            else:
                w = semicircle_start(mu, n, z)
        elif start == "semicircle":
            w = semicircle_start(mu, n, z)
        elif start == "z":
            w = z.copy()
        else:
            raise ValueError(f"unknown start {start!r}")
    else:
        w = np.array(start, dtype=complex).reshape(z.shape)
    bad_start = w.imag < z.imag
    w[bad_start] = z[bad_start]
    scale = 1.0 + np.abs(z)
    lam = np.ones(z.shape)
    iters = np.zeros(z.shape, dtype=int)
    Fw = F(w)
    res = np.abs(n * w - (n - 1) * Fw - z)
    history = [res.copy()] if keep_history else []
    for _ in range(max_iter):
        target = np.maximum(tol * scale, _roundoff_floor(n, w, Fw, z))
        active = res > target
        if not active.any():
            break
        idx = np.flatnonzero(active)
        wa, za, Fa, ra = w[idx], z[idx], Fw[idx], res[idx]
        h = n * wa - (n - 1) * Fa - za
        use_newton = ra < newton_switch * scale[idx]
        cand = (1.0 - lam[idx]) * wa + lam[idx] * (za + (n - 1) * Fa) / n
        if use_newton.any():
            j = np.flatnonzero(use_newton)
            step = h[j] / (n - (n - 1) * dF(wa[j]))
            cand[j] = wa[j] - step
        # keep iterates in the region Im w >= Im z
        low = cand.imag < za.imag
        cand[low] = cand[low].real + 1j * 0.5 * (wa[low].imag + za[low].imag)
        Fc = F(cand)
        rc = np.abs(n * cand - (n - 1) * Fc - za)
        worse = rc > ra
        newton_worse = worse & use_newton
        if newton_worse.any():
            # fall back to a damped Picard step
            j = np.flatnonzero(newton_worse)
            cand[j] = (1.0 - lam[idx][j]) * wa[j] + lam[idx][j] * (za[j] + (n - 1) * Fa[j]) / n
            Fc[j] = F(cand[j])
            rc[j] = np.abs(n * cand[j] - (n - 1) * Fc[j] - za[j])
        lam_idx = lam[idx]
        lam_idx[worse & ~use_newton] *= 0.5
        lam_idx[~worse] = np.minimum(1.0, lam_idx[~worse] * 2.0)
        lam_idx = np.maximum(lam_idx, LAMBDA_FLOOR)
        lam[idx] = lam_idx
        w[idx], Fw[idx], res[idx] = cand, Fc, rc
        iters[idx] += 1
        if keep_history:
            history.append(res.copy())
    converged = res <= np.maximum(tol * scale, _roundoff_floor(n, w, Fw, z))
    return SubordinationSolution(n, z, w, res, iters, converged, history)


def solve_Z(mu: Measure, n, z, tol=1e-13, max_iter=500):
    """Scalar convenience wrapper; returns ``(Z, residual, converged)``."""
    if isinstance(z, UpperHalfPoint):
        z = z.z
    sol = solve_Z_many(mu, n, [z], tol=tol, max_iter=max_iter)
    if not sol.converged[0]:
        log.warning("solve_Z: max_iter reached at z=%s (residual %.3g)", z, sol.residuals[0])
    return complex(sol.Z_values[0]), float(sol.residuals[0]), bool(sol.converged[0])


def operational_n1(mu: Measure, ns, z):
    """Smallest ``n`` in ``ns`` from which every solve on the grid ``z`` converges.

    Stands in for the unspecified threshold ``n_1(mu)``; ``None`` if even
    the largest ``n`` fails.
    """
    ok = [bool(solve_Z_many(mu, n, z).all_converged) for n in ns]
    for k, n in enumerate(ns):
        if all(ok[k:]):
            return int(n)
    return None


def subordination_S(mu, n, z, **kwargs):
    """``S_n(z) = Z(sqrt(n) z) / sqrt(n)`` (vectorized)."""
    rn = np.sqrt(n)
    sol = solve_Z_many(mu, n, rn * np.atleast_1d(np.asarray(z, dtype=complex)), **kwargs)
    return sol.Z_values / rn, sol


def transform_of_power(mu: Measure, n, z, **kwargs):
    """Cauchy transform of the normalized power ``mu_n`` at ``z``.

    ``G_{mu_n}(z) = sqrt(n) G_mu(sqrt(n) S_n(z))``.
    """
    scalar = np.ndim(z) == 0 and not isinstance(z, np.ndarray)
    if isinstance(z, UpperHalfPoint):
        z, scalar = z.z, True
    S, sol = subordination_S(mu, n, z, **kwargs)
    g = np.sqrt(n) * mu.cauchy(np.sqrt(n) * S)
    if not sol.all_converged:
        log.warning("transform_of_power: %d unconverged points", int((~sol.converged).sum()))
    return complex(g[0]) if scalar else g


# ---------------------------------------------------------------------------
# real-axis boundary values and densities
# ---------------------------------------------------------------------------

def _g_zeros_residues(mu: Atomic):
    """Zeros of G between consecutive atoms and masses ``-1/G'`` there."""
    if mu.locations.size < 2:
        raise MeasureError("a Dirac measure has no subordination structure")
    centered = Atomic(mu.locations - mu.moment(1), mu.weights)
    tau = extract_tau(centered, center_tol=1e-9)
    return tau.locations + mu.moment(1), tau.masses


def power_support(mu: Measure, n):
    """Support of the normalized power ``mu_n`` as a list of intervals.

    The edges are the images ``(n x - (n-1) F(x)) / sqrt(n)`` of the real
    critical points where ``(n - 1)(F'(x) - 1) = 1``.
    """
    rn = np.sqrt(n)
    if isinstance(mu, Atomic):
        u, m = _g_zeros_residues(mu)
        shift = mu.moment(1)

        def phi(x):
            return (n - 1) * np.sum(m / (u - x) ** 2) - 1.0

        def H(x):
            F = x - shift + np.sum(m / (u - x))
            return n * x - (n - 1) * F

        span = np.sqrt((n - 1) * m.sum()) + 1.0
        crit = [brentq(phi, u[0] - span - 1.0, u[0] - 1e-12 * max(1, abs(u[0])), xtol=1e-15)]
        for a, b in zip(u[:-1], u[1:]):
            # phi is convex between poles; a gap opens where its minimum is negative
            res = minimize_scalar(phi, bounds=(a, b), method="bounded",
                                  options={"xatol": 1e-14 * max(1.0, abs(a), abs(b))})
            if res.fun < 0:
                crit.append(brentq(phi, a + 1e-14 * max(1, abs(a)), res.x, xtol=1e-15))
                crit.append(brentq(phi, res.x, b - 1e-14 * max(1, abs(b)), xtol=1e-15))
        crit.append(brentq(phi, u[-1] + 1e-12 * max(1, abs(u[-1])), u[-1] + span + 1.0,
                           xtol=1e-15))
        edges = np.array([H(c) for c in crit]) / rn
        return [(float(edges[i]), float(edges[i + 1])) for i in range(0, len(edges), 2)]
    lo, hi = mu.support()
    F, dF = _transform_pair(mu)
    target = n / (n - 1.0)

    def crit_eq(x):
        return float(np.real(dF(complex(x)))) - target

    width = hi - lo
    edges = []
    for side, start in ((-1, lo), (1, hi)):
        near = start + side * 1e-12 * max(1.0, width)
        far = start + side * (width + 10.0 * np.sqrt(n))
        if crit_eq(near) <= 0:
            x = near
        else:
            x = brentq(crit_eq, near, far, xtol=1e-15) if side > 0 else \
                brentq(crit_eq, far, near, xtol=1e-15)
        edges.append(float(np.real(n * x - (n - 1) * F(complex(x)))) / rn)
    return [(edges[0], edges[1])]


def _atomic_boundary_Z(mu: Atomic, n, zs):
    """Roots of ``(n w - z) N(w) - (n - 1) D(w)`` where ``G = N / D``.

    For real ``z`` inside the support exactly one root lies in the upper
    half-plane (roots there must sit on the boundary curve of the
    subordination domain, which maps bijectively onto the real line).
    """
    P = np.polynomial.Polynomial
    x, p = mu.locations, mu.weights
    D = P.fromroots(x)
    N = sum(pj * (P.fromroots(np.delete(x, j)) if x.size > 1 else P([1.0]))
            for j, pj in enumerate(p))
    nw = P([0.0, float(n)])
    zs = np.atleast_1d(zs)
    out = np.empty(zs.size, dtype=complex)
    for i, z in enumerate(zs):
        poly = (nw - z) * N - (n - 1) * D
        roots = poly.roots()
        out[i] = roots[np.argmax(roots.imag)]
    return out


def _newton_polish(mu, n, z, w, steps=8):
    F, dF = _transform_pair(mu)
    for _ in range(steps):
        h = n * w - (n - 1) * F(w) - z
        step = h / (n - (n - 1) * dF(w))
        w_new = w - step
        ok = np.isfinite(w_new) & (w_new.imag > 0)
        w = np.where(ok, w_new, w)
    res = np.abs(n * w - (n - 1) * F(w) - z)
    return w, res


CONTINUATION_LADDER = (1.0, 0.3, 0.1, 0.03, 0.01, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5, 0.0)


def boundary_Z(mu: Measure, n, x_scaled):
    """Boundary values ``Z(x)`` for real ``x`` (unscaled variable).

    Atomic measures use the polynomial form of the equation; other measures
    follow the solution down from ``x + i`` by Newton continuation.
    Returns ``(Z, residual)``.
    """
    xs = np.atleast_1d(np.asarray(x_scaled, dtype=float))
    if isinstance(mu, Atomic):
        Z = _atomic_boundary_Z(mu, n, xs.astype(complex))
        inside = Z.imag > 1e-14
        Zi, res = _newton_polish(mu, n, xs[inside].astype(complex), Z[inside])
        Z[inside] = Zi
        residual = np.zeros(xs.shape)
        residual[inside] = res
        return Z, residual
    sol = solve_Z_many(mu, n, xs + 1j * CONTINUATION_LADDER[0], tol=1e-13)
    w = sol.Z_values
    F, dF = _transform_pair(mu)
    for eps in CONTINUATION_LADDER[1:]:
        z = xs + 1j * eps
        for _ in range(30):
            h = n * w - (n - 1) * F(w) - z
            step = h / (n - (n - 1) * dF(w))
            w_new = w - step
            ok = np.isfinite(w_new) & (w_new.imag > 0)
            w = np.where(ok, w_new, w)
            if np.all(np.abs(step[ok]) < 1e-15 * (1 + np.abs(w[ok]))):
                break
    residual = np.abs(n * w - (n - 1) * F(w) - xs)
    return w, residual


@dataclass(frozen=True, eq=False)
class PowerDensity:
    """Density of ``mu_n`` on a grid plus per-point solver diagnostics."""

    n: int
    grid: GridDensity
    support: tuple
    residuals: np.ndarray
    flagged: np.ndarray
    mass: float

    @property
    def flag_rate(self):
        return float(np.mean(self.flagged)) if self.flagged.size else 0.0

    def density(self, x):
        return self.grid.density(x)


def density_values(mu, n, x, method="boundary", eps_ladder=None):
    """``p_n(x)`` at points ``x`` with residuals and flags (no grid object)."""
    from .cauchy import stieltjes_density, DEFAULT_LADDER

    x = np.atleast_1d(np.asarray(x, dtype=float))
    rn = np.sqrt(n)
    intervals = power_support(mu, n)
    inside = np.zeros(x.shape, dtype=bool)
    for a, b in intervals:
        inside |= (x > a) & (x < b)
    values = np.zeros(x.shape)
    residuals = np.zeros(x.shape)
    flagged = np.zeros(x.shape, dtype=bool)
    if not inside.any():
        return values, residuals, flagged, intervals
    xi = x[inside]
    if method == "boundary":
        Z, res = boundary_Z(mu, n, rn * xi)
        g = rn * (n - 1) / (n * Z - rn * xi)
        vals = -g.imag / np.pi
        bad = (Z.imag <= 0) | (res > 1e-9 * (1 + rn * np.abs(xi)))
        values[inside] = np.maximum(vals, 0.0)
        residuals[inside] = res
        flagged[inside] = bad
    elif method == "richardson":
        ladder = tuple(eps_ladder or DEFAULT_LADDER)
        out = []
        for xx in xi:
            sv = stieltjes_density(lambda zz: transform_of_power(mu, n, zz), xx, ladder)
            out.append(sv)
        values[inside] = [max(s.value, 0.0) for s in out]
        residuals[inside] = [s.residual for s in out]
        flagged[inside] = [s.flagged for s in out]
    else:
        raise ValueError(f"unknown method {method!r}")
    return values, residuals, flagged, intervals


def density_pn(mu: Measure, n, grid, method="boundary", eps_ladder=None, max_flag_rate=0.05):
    """Density of ``mu_n`` on a caller-supplied grid.

    Points outside the recovered support get density zero.  More than
    ``max_flag_rate`` flagged points is an error.
    """
    grid = np.asarray(grid, dtype=float)
    values, residuals, flagged, intervals = density_values(mu, n, grid, method, eps_ladder)
    lo = min(grid[0], intervals[0][0])
    hi = max(grid[-1], intervals[-1][1])
    if np.mean(flagged) > max_flag_rate:
        raise SolverError(f"{int(flagged.sum())} of {grid.size} grid points flagged")
    gd = GridDensity(lo, hi, grid, values, check_mass=False)
    mass = gd.integrate(lambda u: np.ones_like(u)) if gd._chebyshev else \
        float(np.trapezoid(values, grid))
    return PowerDensity(n, gd, tuple(intervals[0]) if len(intervals) == 1 else tuple(intervals),
                        residuals, flagged, mass)


def power_density(mu: Measure, n, resolution=256, method="boundary", max_flag_rate=0.05):
    """Density of ``mu_n`` on a Chebyshev grid of its recovered support.

    Requires a single-interval support; the grid density then carries a
    spectrally accurate interpolant.
    """
    intervals = power_support(mu, n)
    if len(intervals) != 1:
        raise SolverError(f"support of mu_{n} has {len(intervals)} components")
    lo, hi = intervals[0]
    nodes = quad.chebyshev_nodes(lo, hi, resolution)
    values, residuals, flagged, _ = density_values(mu, n, nodes, method)
    if np.mean(flagged) > max_flag_rate:
        raise SolverError(f"{int(flagged.sum())} of {resolution} grid points flagged")
    gd = GridDensity(lo, hi, nodes, values, check_mass=False)
    mass = gd.integrate(lambda u: np.ones_like(u))
    return PowerDensity(n, gd, (lo, hi), residuals, flagged, mass)


# ---------------------------------------------------------------------------
# truncation
# ---------------------------------------------------------------------------

ETA_CEILING = 10 ** -0.5


def _g_n(tau: TauRepresentation, n, eps):
    cut = eps * np.sqrt(n - 1) * (1.0 + 1e-12)
    return eps + tau.tail_second_moment(cut) / (tau.moment(2) * eps * eps)


def eta_and_delta(tau: TauRepresentation, n, scan_points=1024, floor=1e-9):
    """``delta_n`` minimizing ``g_n(eps; tau)`` over ``(0, 10^{-1/2}]`` and ``eta = g_n(delta_n)``.

    Dense log-spaced scan (with the jump points ``|u|/sqrt(n-1)`` of the
    tail added) followed by bounded golden-section refinement.
    """
    m2 = tau.moment(2)
    if not (m2 > 0 and np.isfinite(m2)):
        raise MeasureError("eta_and_delta needs 0 < m_2(tau) < inf")
    grid = np.geomspace(floor, ETA_CEILING, scan_points)
    jumps = np.abs(tau.locations) / np.sqrt(n - 1)
    grid = np.unique(np.concatenate([grid, jumps[(jumps > floor) & (jumps <= ETA_CEILING)]]))
    vals = np.array([_g_n(tau, n, e) for e in grid])
    k = int(np.argmin(vals))
    best_eps, best = grid[k], vals[k]
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, grid.size - 1)]
    if hi > lo:
        # refine only inside the smooth piece to the right of a jump
        left = max(lo, best_eps)
        if hi > left:
            res = minimize_scalar(lambda e: _g_n(tau, n, e), bounds=(left, hi), method="bounded",
                                  options={"xatol": 1e-13})
            if res.fun < best:
                best_eps, best = float(res.x), float(res.fun)
        right = min(hi, best_eps)
        if right > lo:
            res = minimize_scalar(lambda e: _g_n(tau, n, e), bounds=(lo, right), method="bounded",
                                  options={"xatol": 1e-13})
            if res.fun < best:
                best_eps, best = float(res.x), float(res.fun)
    return float(best), float(best_eps)


@dataclass(frozen=True, eq=False)
class TruncationContext:
    """Truncated tau-measure and the probability measure it generates."""

    n: int
    delta_n: float
    eta_n: float
    tau: TauRepresentation
    tau_star: TauRepresentation
    mu_star: Atomic
    tail_mass: float
    checks: dict

    @property
    def cut(self):
        return self.delta_n * np.sqrt(self.n - 1)

    def support_bound_holds(self):
        lo, hi = self.mu_star.support()
        return max(abs(lo), abs(hi)) <= np.sqrt(self.n - 1) / 3.0


def moment_gap_checks(mu, mu_star, tau, tau_star, cut):
    """Left and right sides of the truncation moment-gap inequalities.

    The right sides are the intermediate expressions (before the unknown
    constants enter).
    """
    dm2 = mu.moment(2) - mu_star.moment(2)
    dm3 = abs(mu.moment(3) - mu_star.moment(3))
    dm4 = abs(mu.moment(4) - mu_star.moment(4))
    tail_abs = float(np.dot(tau.masses[np.abs(tau.locations) > cut],
                            np.abs(tau.locations[np.abs(tau.locations) > cut])))
    m1t, m1s = tau.moment(1), tau_star.moment(1)
    m2t, m2s = tau.moment(2), tau_star.moment(2)
    rhs2 = tau.tail_second_moment(cut) / cut ** 2 if cut > 0 else np.inf
    rhs3 = tail_abs + abs(dm2) * abs(m1s)
    rhs4 = abs(m2t - m2s) + abs(dm2) * abs(m2s) + abs(m1t - m1s) * abs(m1t + m1s)
    return {
        "m2_gap": (dm2, rhs2, dm2 <= rhs2 + 1e-12),
        "m2_gap_equals_tail": (dm2, tau.tail_mass(cut), abs(dm2 - tau.tail_mass(cut)) < 1e-10),
        "m3_gap": (dm3, rhs3, dm3 <= rhs3 + 1e-12),
        "m4_gap": (dm4, rhs4, dm4 <= rhs4 + 1e-12),
        "m1_star_zero": (abs(mu_star.moment(1)), 1e-12, abs(mu_star.moment(1)) <= 1e-12),
    }


def build_truncated(mu: Atomic, n, tau=None):
    """Truncation context for an atomic standardized ``mu`` at ``n``."""
    tau = tau if tau is not None else extract_tau(mu)
    if tau.moment(2) == 0.0:
        # tau sits at the origin: nothing is ever cut off
        eta, delta = 0.0, 0.0
    else:
        eta, delta = eta_and_delta(tau, n)
    cut = delta * np.sqrt(n - 1) * (1.0 + 1e-12)
    tau_star = tau.restrict(cut)
    mu_star = tau_star.measure()
    ctx = TruncationContext(n=n, delta_n=delta, eta_n=eta, tau=tau, tau_star=tau_star,
                            mu_star=mu_star, tail_mass=tau.tail_mass(cut),
                            checks=moment_gap_checks(mu, mu_star, tau, tau_star, cut))
    return ctx


def solve_T(ctx: TruncationContext, z, **kwargs):
    """``T_n(z) = W(sqrt(n) z) / sqrt(n)`` for the truncated measure (vectorized)."""
    T, sol = subordination_S(ctx.mu_star, ctx.n, z, **kwargs)
    return T, sol


def T_lower_bound_ok(Z, n):
    """Diagnostic only: ``|Z| >= sqrt((n - 1)/8)``."""
    return np.abs(Z) >= np.sqrt((n - 1) / 8.0)
