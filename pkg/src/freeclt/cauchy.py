"""Cauchy transforms, Stieltjes inversion and the tau-representation.

For a centered measure with finite variance the reciprocal Cauchy transform
has the form ``F(z) = z + int tau(du) / (u - z)``; :func:`extract_tau`
computes ``tau`` exactly for atomic measures.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .measures import Atomic, Measure, MeasureError


class TransformError(ArithmeticError):
    """Numerical failure while evaluating a transform."""


@dataclass(frozen=True)
class UpperHalfPoint:
    re: float
    im: float

    def __post_init__(self):
        if not self.im > 0:
            raise ValueError(f"point must lie in the open upper half-plane (im={self.im})")

    @property
    def z(self):
        return complex(self.re, self.im)

    @classmethod
    def of(cls, z):
        z = complex(z)
        return cls(z.real, z.imag)


def _as_upper(z):
    """Coerce to a complex array, rejecting points with ``Im z <= 0``."""
    if isinstance(z, UpperHalfPoint):
        return z.z
    arr = np.asarray(z, dtype=complex)
    if np.any(arr.imag <= 0):
        raise ValueError("transforms are evaluated in the open upper half-plane only")
    return arr if arr.ndim else complex(arr)


def cauchy_G(mu: Measure, z):
    """``G(z) = int mu(du) / (z - u)`` for ``Im z > 0`` (array friendly)."""
    return mu.cauchy(_as_upper(z))


def reciprocal_F(mu: Measure, z):
    """``F(z) = 1 / G(z)``."""
    g = np.asarray(cauchy_G(mu, z))
    if np.any(g == 0):
        raise TransformError("Cauchy transform vanished in the upper half-plane")
    out = 1.0 / g
    return out if out.ndim else complex(out)


def reciprocal_F_derivative(mu: Measure, z):
    z = _as_upper(z)
    g = mu.cauchy(z)
    return -mu.cauchy_derivative(z) / (g * g)


@dataclass(frozen=True)
class StieltjesValue:
    value: float
    residual: float
    flagged: bool


DEFAULT_LADDER = (1e-3, 5e-4, 2.5e-4)


def stieltjes_density(g, x, eps_ladder=DEFAULT_LADDER):
    """Density ``-Im g(x + i eps) / pi`` extrapolated to ``eps -> 0``.

    Parameters
    ----------
    g : callable
        Transform evaluator taking a complex array.
    x : float
        Real point.
    eps_ladder : sequence of float
        Strictly decreasing offsets (>= 1e-9).

    Returns
    -------
    StieltjesValue
        Richardson (Neville) extrapolated value, the size of the last
        correction, and whether the ladder failed to converge.
    """
    eps = np.asarray(eps_ladder, dtype=float)
    if eps.size < 2 or np.any(np.diff(eps) >= 0) or eps[-1] < 1e-9:
        raise ValueError("eps_ladder must be strictly decreasing with entries >= 1e-9")
    vals = -np.imag(np.asarray(g(x + 1j * eps), dtype=complex)) / np.pi
    # Neville table for the polynomial in eps evaluated at eps = 0
    table = [vals.copy()]
    for level in range(1, eps.size):
        prev = table[-1]
        lo_eps, hi_eps = eps[:-level], eps[level:]
        table.append((hi_eps * prev[:-1] - lo_eps * prev[1:]) / (hi_eps - lo_eps))
    best = float(table[-1][0])
    residual = float(abs(table[-1][0] - table[-2][-1]))
    diffs = np.abs(np.diff(vals))
    flagged = bool(diffs.size > 1 and np.all(np.diff(diffs) > 0) and diffs[-1] > 1e-6)
    if flagged:
        best = float(vals[-1])
    if -1e-8 <= best < 0.0:
        best = 0.0
    return StieltjesValue(best, residual, flagged)


@dataclass(frozen=True, eq=False)
class TauRepresentation:
    """Nonnegative measure ``tau`` with ``F(z) = z + int tau(du)/(u - z)``.

    ``locations``/``masses`` describe the atoms; ``masses`` need not sum to 1.
    """

    locations: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.locations, dtype=float).ravel()
        m = np.asarray(self.masses, dtype=float).ravel()
        if x.size != m.size or np.any(m < 0):
            raise MeasureError("tau needs one nonnegative mass per location")
        object.__setattr__(self, "locations", x)
        object.__setattr__(self, "masses", m)

    @property
    def total_mass(self):
        return float(self.masses.sum())

    def moment(self, k):
        return float(np.dot(self.masses, self.locations ** k))

    @property
    def moments(self):
        return tuple(self.moment(k) for k in range(3))

    def tail_second_moment(self, cut):
        """``int_{|u| > cut} u^2 tau(du)``."""
        out = np.abs(self.locations) > cut
        return float(np.dot(self.masses[out], self.locations[out] ** 2))

    def tail_mass(self, cut):
        return float(self.masses[np.abs(self.locations) > cut].sum())

    def restrict(self, cut):
        """Atoms with ``|u| <= cut`` (the truncated measure)."""
        keep = np.abs(self.locations) <= cut
        return TauRepresentation(self.locations[keep], self.masses[keep])

    def reciprocal(self, z):
        z = np.asarray(z, dtype=complex)
        return z + np.sum(self.masses / (self.locations - z[..., None]), axis=-1)

    def reciprocal_derivative(self, z):
        z = np.asarray(z, dtype=complex)
        return 1.0 + np.sum(self.masses / (self.locations - z[..., None]) ** 2, axis=-1)

    def measure(self):
        """The probability measure whose reciprocal transform is ``z + int tau/(u - z)``.

        Atoms sit at the real zeros of ``F`` (``k + 1`` of them for ``k``
        atoms of ``tau``, interlacing) with weights ``1 / F'(root)``.
        """
        if self.locations.size == 0 or self.total_mass == 0.0:
            return Atomic([0.0], [1.0])
        u = np.sort(self.locations)
        roots = []
        span = np.sqrt(self.total_mass) + np.abs(u).max() + 1.0
        brackets = [(u[0] - span, u[0])] + list(zip(u[:-1], u[1:])) + [(u[-1], u[-1] + span)]

        def f(x):
            return float(np.real(self.reciprocal(x)))

        for lo, hi in brackets:
            gap = 1e-14 * max(1.0, abs(lo), abs(hi))
            roots.append(_bracketed_root(f, lo, hi, gap))
        roots = np.array(roots)
        weights = 1.0 / np.real(self.reciprocal_derivative(roots))
        weights /= weights.sum()
        return Atomic(roots, weights)


def _bracketed_root(f, lo, hi, gap):
    """Root of a function increasing between two poles (or a pole and +-inf)."""
    a, b = lo + gap, hi - gap
    fa, fb = f(a), f(b)
    step = max(1e-12, 1e-10 * (hi - lo))
    while fa > 0 and a < b:
        a = lo + step
        fa = f(a)
        step *= 10
    step = max(1e-12, 1e-10 * (hi - lo))
    while fb < 0 and b > a:
        b = hi - step
        fb = f(b)
        step *= 10
    if not (fa <= 0 <= fb):
        raise TransformError(f"could not bracket a root in ({lo}, {hi})")
    return brentq(f, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


def extract_tau(mu: Atomic, center_tol=1e-12):
    """tau-representation of a centered atomic measure with ``k >= 2`` atoms.

    The ``k - 1`` atoms of ``tau`` are the zeros of ``G`` (one between each
    pair of consecutive atoms of ``mu``); the mass at a zero ``u`` is the
    residue ``-1/G'(u)`` of ``F``.
    """
    if not isinstance(mu, Atomic):
        raise MeasureError("extract_tau needs an atomic measure")
    if mu.locations.size < 2:
        raise MeasureError("extract_tau needs at least two atoms")
    if abs(mu.moment(1)) > center_tol:
        raise MeasureError("extract_tau needs a centered measure (m_1 = 0)")
    x = mu.locations
    zeros = []
    for lo, hi in zip(x[:-1], x[1:]):
        gap = 1e-15 * max(1.0, abs(lo), abs(hi))
        # G decreases from +inf to -inf between consecutive atoms
        def g(t):
            return float(np.real(mu.cauchy(t)))
        a, b = lo + gap, hi - gap
        if not (g(a) > 0 > g(b)):
            raise TransformError(f"G has no sign change between atoms {lo} and {hi}")
        root = brentq(g, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
        # Newton polish
        for _ in range(3):
            step = np.real(mu.cauchy(root)) / np.real(mu.cauchy_derivative(root))
            if abs(step) > (hi - lo) * 1e-3:
                break
            root -= float(step)
        zeros.append(root)
    zeros = np.array(zeros)
    masses = -1.0 / np.real(mu.cauchy_derivative(zeros))
    return TauRepresentation(zeros, masses)


def laurent_moments_from_F(F, k_max=4, radius=None, points=256):
    """Moments of the measure whose reciprocal transform is ``F``.

    Brute-force oracle: the coefficients of ``1/F`` at infinity, read off
    from samples on a large circle via the discrete Fourier transform.
    ``F`` must satisfy ``F(conj z) = conj F(z)``.
    """
    radius = radius or 8.0
    theta = 2.0 * np.pi * (np.arange(points) + 0.5) / points
    z = radius * np.exp(1j * theta)
    upper = z.imag > 0
    f = np.empty_like(z)
    f[upper] = F(z[upper])
    f[~upper] = np.conj(F(np.conj(z[~upper])))
    g = 1.0 / f
    return np.array([np.real(np.mean(z ** (k + 1) * g)) for k in range(k_max + 1)])
