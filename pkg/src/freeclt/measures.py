"""Probability measures on the real line.

Three representations are supported: finitely many atoms
(:class:`Atomic`), a density tabulated on a grid (:class:`GridDensity`) and
named families with closed forms (:class:`Semicircle`, :class:`Arcsine`,
:class:`FreeMeixner`).  All of them are immutable and expose moments,
the Cauchy transform ``G(z) = int mu(du) / (z - u)`` and its derivative.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy.interpolate import PchipInterpolator

from . import quadrature as quad
from ._branch import edge_sqrt

K_MAX = 8


class MeasureError(ValueError):
    """Invalid measure construction or an operation the measure can't do."""


class NumericFallbackWarning(UserWarning):
    """A closed form was unavailable and a numerical method was used."""


def _catalan(j):
    return comb(2 * j, j) // (j + 1)


class Measure:
    """Common interface.  Subclasses are frozen dataclasses."""

    kind = "abstract"

    def moment(self, k):
        raise NotImplementedError

    def cauchy(self, z):
        raise NotImplementedError

    def cauchy_derivative(self, z):
        raise NotImplementedError

    def support(self):
        raise NotImplementedError

    def has_density(self):
        return True

    def density(self, x):
        raise NotImplementedError

    def affine(self, center, scale):
        """Image under ``u -> (u - center) / scale``."""
        raise NotImplementedError

    def to_literal(self):
        raise NotImplementedError

    def moments(self, k_max=4):
        return np.array([self.moment(k) for k in range(k_max + 1)])

    def mean(self):
        return self.moment(1)

    def variance(self):
        return self.moment(2) - self.moment(1) ** 2


@dataclass(frozen=True, eq=False)
class Atomic(Measure):
    """Finite combination of Dirac masses."""

    locations: np.ndarray
    weights: np.ndarray
    affine_map: tuple | None = None
    kind = "atomic"

    def __post_init__(self):
        x = np.asarray(self.locations, dtype=float).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        if x.size == 0 or x.size != w.size:
            raise MeasureError("atoms and weights must be nonempty and of equal length")
        if np.any(w <= 0.0) or np.any(w > 1.0):
            raise MeasureError("atom weights must lie in (0, 1]")
        if abs(w.sum() - 1.0) > 1e-12:
            raise MeasureError(f"atom weights sum to {w.sum():.15g}, not 1")
        if np.any(np.diff(x) <= 0.0):
            raise MeasureError("atom locations must be strictly increasing")
        x.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "locations", x)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_pairs(cls, pairs, **kwargs):
        pairs = sorted((float(a), float(b)) for a, b in pairs)
        return cls([p[0] for p in pairs], [p[1] for p in pairs], **kwargs)

    def moment(self, k):
        return float(np.dot(self.weights, self.locations ** k))

    def cauchy(self, z):
        z = np.asarray(z, dtype=complex)
        return np.sum(self.weights / (z[..., None] - self.locations), axis=-1)

    def cauchy_derivative(self, z):
        z = np.asarray(z, dtype=complex)
        return -np.sum(self.weights / (z[..., None] - self.locations) ** 2, axis=-1)

    def support(self):
        return float(self.locations[0]), float(self.locations[-1])

    def has_density(self):
        return False

    def density(self, x):
        raise MeasureError("atomic measures have no density")

    def affine(self, center, scale):
        return Atomic((self.locations - center) / scale, self.weights,
                      affine_map=(float(center), float(scale)))

    def to_literal(self):
        return {"type": "atomic",
                "atoms": [[float(a), float(b)] for a, b in zip(self.locations, self.weights)]}

    def __repr__(self):
        atoms = ", ".join(f"{w:.4g}@{x:.4g}" for x, w in zip(self.locations, self.weights))
        return f"Atomic({atoms})"


@dataclass(frozen=True, eq=False)
class GridDensity(Measure):
    """Density tabulated at nodes inside ``[lo, hi]``.

    On a Chebyshev grid of the first kind the density is interpolated as
    ``sqrt(1 - t^2) q(t)`` with ``q`` a polynomial, which is exact for the
    square-root edges of every density in scope.  Other grids fall back to
    monotone cubic interpolation.
    """

    lo: float
    hi: float
    nodes: np.ndarray
    values: np.ndarray
    affine_map: tuple | None = None
    check_mass: bool = field(default=True, repr=False)
    kind = "grid"

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        x = np.asarray(self.nodes, dtype=float).ravel()
        p = np.asarray(self.values, dtype=float).ravel()
        if not hi > lo:
            raise MeasureError("grid support must have hi > lo")
        if x.size < 2 or x.size != p.size:
            raise MeasureError("grid needs at least two nodes and one value per node")
        if np.any(np.diff(x) <= 0.0):
            raise MeasureError("grid nodes must be strictly increasing")
        if x[0] < lo or x[-1] > hi:
            raise MeasureError("grid nodes must lie inside [lo, hi]")
        if np.any(p < 0.0) or not np.all(np.isfinite(p)):
            raise MeasureError("grid density values must be finite and nonnegative")
        x.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "nodes", x)
        object.__setattr__(self, "values", p)
        cheb = quad.is_chebyshev_grid(lo, hi, x)
        object.__setattr__(self, "_chebyshev", cheb)
        if cheb:
            t = self._to_t(x)
            object.__setattr__(self, "_t", t)
            object.__setattr__(self, "_q", p / np.sqrt(1.0 - t * t))
        else:
            object.__setattr__(self, "_pchip", PchipInterpolator(x, p, extrapolate=True))
        if self.check_mass:
            mass = self.integrate(lambda u: np.ones_like(u))
            if abs(mass - 1.0) > 1e-6:
                raise MeasureError(f"grid density integrates to {mass:.10g}, not 1")

    def _to_t(self, x):
        return (2.0 * np.asarray(x, dtype=float) - self.lo - self.hi) / (self.hi - self.lo)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        out = np.zeros_like(flat)
        inside = (flat > self.lo) & (flat < self.hi)
        if inside.any():
            if self._chebyshev:
                t = self._to_t(flat[inside])
                vals = np.sqrt(1.0 - t * t) * quad.chebyshev_barycentric(self._t, self._q, t)
            else:
                vals = self._pchip(flat[inside])
            out[inside] = np.maximum(vals, 0.0)
        return out.reshape(x.shape)

    def rule(self, order=8):
        """Composite Gauss-Legendre rule on inter-node cells (nodes, weights)."""
        if self._chebyshev:
            m = self.nodes.size
            theta_edges = np.concatenate([[np.pi], (np.arange(m - 1, 0, -1)) * np.pi / m, [0.0]])
            theta, wt = quad.panel_rule(theta_edges, order)
            c, r = 0.5 * (self.lo + self.hi), 0.5 * (self.hi - self.lo)
            return c + r * np.cos(theta), -wt * r * np.sin(theta)
        edges = np.unique(np.concatenate([[self.lo], self.nodes, [self.hi]]))
        return quad.panel_rule(edges, order)

    def integrate(self, f, order=8):
        x, w = self.rule(order)
        return float(np.sum(w * f(x) * self.density(x)))

    def moment(self, k):
        return self.integrate(lambda u: u ** k)

    def cauchy(self, z):
        z = np.asarray(z, dtype=complex)
        flat = z.ravel()
        out = np.array([_density_cauchy(self.density, self.lo, self.hi, zz) for zz in flat])
        return out.reshape(z.shape)

    def cauchy_derivative(self, z):
        z = np.asarray(z, dtype=complex)
        flat = z.ravel()
        out = np.array([_density_cauchy(self.density, self.lo, self.hi, zz, power=2)
                        for zz in flat])
        return -out.reshape(z.shape)

    def support(self):
        return self.lo, self.hi

    def affine(self, center, scale):
        lo, hi = sorted(((self.lo - center) / scale, (self.hi - center) / scale))
        nodes = (self.nodes - center) / scale
        values = self.values * abs(scale)
        if scale < 0:
            nodes, values = nodes[::-1], values[::-1]
        return GridDensity(lo, hi, nodes, values, affine_map=(float(center), float(scale)),
                           check_mass=self.check_mass)

    def to_literal(self):
        return {"type": "grid", "lo": self.lo, "hi": self.hi,
                "nodes": self.nodes.tolist(), "values": self.values.tolist()}

    def __repr__(self):
        return f"GridDensity([{self.lo:.6g}, {self.hi:.6g}], {self.nodes.size} nodes)"


def _density_cauchy(pdf, lo, hi, z, power=1):
    """``int pdf(u) / (z - u)**power du`` over [lo, hi] for one point ``z``.

    The rule is graded toward ``Re z`` so that points close to the real
    axis are resolved; for ``power=1`` the value ``pdf(Re z)`` is subtracted
    and integrated in closed form.
    """
    x0 = min(max(z.real, lo), hi)
    u, w = split_rule(lo, hi, x0)
    if power == 1:
        p0 = float(pdf(np.array([z.real]))[0]) if lo < z.real < hi else 0.0
        body = np.sum(w * (pdf(u) - p0) / (z - u))
        return body + p0 * (np.log(z - lo) - np.log(z - hi))
    return np.sum(w * pdf(u) / (z - u) ** power)


def split_rule(lo, hi, x0, order=16, ratio=0.2, smallest=1e-13):
    """Angle-variable rule on [lo, hi] graded toward the point ``x0``.

    Nodes never coincide with ``x0``.  Returns nodes and weights in ``x``.
    """
    c, r = 0.5 * (lo + hi), 0.5 * (hi - lo)
    phi0 = float(np.arccos(np.clip((x0 - c) / r, -1.0, 1.0)))
    parts = []
    if phi0 > 0.0:
        parts.append(quad.graded_edges(phi0, 0.0, ratio, smallest)[::-1])
    if phi0 < np.pi:
        parts.append(quad.graded_edges(phi0, np.pi, ratio, smallest))
    nodes, weights = [], []
    for edges in parts:
        th, wt = quad.panel_rule(edges, order)
        nodes.append(c + r * np.cos(th))
        weights.append(wt * r * np.sin(th))
    return np.concatenate(nodes), np.concatenate(weights)


@dataclass(frozen=True, eq=False)
class Semicircle(Measure):
    """Centered semicircle law of variance ``t``."""

    t: float = 1.0
    kind = "semicircle"

    def __post_init__(self):
        if not self.t > 0:
            raise MeasureError("semicircle variance must be positive")
        object.__setattr__(self, "t", float(self.t))

    @property
    def radius(self):
        return 2.0 * np.sqrt(self.t)

    def moment(self, k):
        if k % 2:
            return 0.0
        return float(_catalan(k // 2) * self.t ** (k // 2))

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return np.sqrt(np.maximum(4.0 * self.t - x * x, 0.0)) / (2.0 * np.pi * self.t)

    def cauchy(self, z):
        z = np.asarray(z, dtype=complex)
        # (z - s)/(2t) rewritten without cancellation
        return 2.0 / (z + edge_sqrt(z, self.radius))

    def cauchy_derivative(self, z):
        z = np.asarray(z, dtype=complex)
        return (1.0 - z / edge_sqrt(z, self.radius)) / (2.0 * self.t)

    def support(self):
        return -self.radius, self.radius

    def affine(self, center, scale):
        if center != 0.0:
            raise MeasureError("shifted semicircles are outside the data model")
        return Semicircle(self.t / scale ** 2)

    def to_literal(self):
        return {"type": "semicircle", "t": self.t}


@dataclass(frozen=True, eq=False)
class Arcsine(Measure):
    """Arcsine law on (-radius, radius), density ``1/(pi sqrt(r^2 - x^2))``."""

    radius: float = np.sqrt(2.0)
    kind = "arcsine"

    def __post_init__(self):
        if not self.radius > 0:
            raise MeasureError("arcsine radius must be positive")
        object.__setattr__(self, "radius", float(self.radius))

    def moment(self, k):
        if k % 2:
            return 0.0
        return float(comb(k, k // 2) * (self.radius / 2.0) ** k)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        gap = self.radius ** 2 - x * x
        out = np.zeros_like(x)
        inside = gap > 0
        out[inside] = 1.0 / (np.pi * np.sqrt(gap[inside]))
        return out

    def cauchy(self, z):
        return 1.0 / edge_sqrt(z, self.radius)

    def cauchy_derivative(self, z):
        z = np.asarray(z, dtype=complex)
        return -z / edge_sqrt(z, self.radius) ** 3

    def support(self):
        return -self.radius, self.radius

    def affine(self, center, scale):
        if center != 0.0:
            raise MeasureError("shifted arcsine laws are outside the data model")
        return Arcsine(self.radius / abs(scale))

    def to_literal(self):
        return {"type": "arcsine", "r": self.radius}


@dataclass(frozen=True, eq=False)
class FreeMeixner(Measure):
    """Free Meixner law with reciprocal Cauchy transform

    ``F(z) = a + ((1 + b)(z - a) + sqrt((1 - b)^2 (z - a)^2 - 4(1 - d))) / 2``.

    Only the absolutely continuous part is represented by :meth:`density`;
    moments come from the transform and include any atoms.
    """

    a: float = 0.0
    b: float = 0.0
    d: float = 0.0
    kind = "free_meixner"

    def __post_init__(self):
        if not (self.b < 1 and self.d < 1):
            raise MeasureError("free Meixner parameters need b < 1 and d < 1")
        for name in ("a", "b", "d"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def half_width(self):
        return 2.0 * np.sqrt(1.0 - self.d) / (1.0 - self.b)

    def reciprocal(self, z):
        z = np.asarray(z, dtype=complex)
        w = z - self.a
        root = (1.0 - self.b) * edge_sqrt(w, self.half_width)
        return self.a + 0.5 * ((1.0 + self.b) * w + root)

    def reciprocal_derivative(self, z):
        z = np.asarray(z, dtype=complex)
        w = z - self.a
        root = edge_sqrt(w, self.half_width)
        return 0.5 * ((1.0 + self.b) + (1.0 - self.b) * w / root)

    def cauchy(self, z):
        return 1.0 / self.reciprocal(z)

    def cauchy_derivative(self, z):
        f = self.reciprocal(z)
        return -self.reciprocal_derivative(z) / (f * f)

    def support(self):
        return self.a - self.half_width, self.a + self.half_width

    def f_poly(self, x):
        x = np.asarray(x, dtype=float)
        return self.b * x * x + self.a * (1.0 - self.b) * x + 1.0 - self.d

    def density(self, x):
        x = np.asarray(x, dtype=float)
        num = 4.0 * (1.0 - self.d) - (1.0 - self.b) ** 2 * (x - self.a) ** 2
        out = np.zeros_like(x)
        inside = num > 0
        out[inside] = np.sqrt(num[inside]) / (2.0 * np.pi * self.f_poly(x[inside]))
        return out

    def moment(self, k):
        warnings.warn(f"free Meixner moment m_{k} computed by contour quadrature",
                      NumericFallbackWarning, stacklevel=2)
        return contour_moment(self, k)

    def affine(self, center, scale):
        if center != 0.0:
            raise MeasureError("shifted free Meixner laws are outside the data model")
        return FreeMeixner(self.a / scale, self.b, 1.0 - (1.0 - self.d) / scale ** 2)

    def to_literal(self):
        return {"type": "free_meixner", "a": self.a, "b": self.b, "d": self.d}


def contour_moment(mu, k, points=512):
    """``m_k`` as the Laurent coefficient of ``G`` on a circle around the support.

    Uses ``G(conj z) = conj G(z)`` for the lower half of the contour.
    """
    lo, hi = mu.support()
    center = 0.5 * (lo + hi)
    radius = 2.0 * max(abs(lo - center), abs(hi - center)) + 1.0
    theta = 2.0 * np.pi * (np.arange(points) + 0.5) / points
    z = center + radius * np.exp(1j * theta)
    upper = z.imag > 0
    g = np.empty_like(z)
    g[upper] = mu.cauchy(z[upper])
    g[~upper] = np.conj(mu.cauchy(np.conj(z[~upper])))
    # m_k = (1 / 2 pi i) * contour integral of z^k G(z) dz
    return float(np.real(np.mean(z ** k * g * (z - center))))


def moment(mu, k, k_max=K_MAX):
    """``int u^k mu(du)``.  ``k`` is capped at ``k_max``."""
    if k < 0 or k > k_max:
        raise MeasureError(f"moment order {k} outside [0, {k_max}]")
    return mu.moment(k)


def standardize(mu):
    """Affine image of ``mu`` with mean 0 and variance 1.

    The returned measure records the map ``u -> (u - center) / scale`` in
    ``affine_map`` where the representation allows it.
    """
    m1 = mu.moment(1)
    var = mu.moment(2) - m1 * m1
    if not var > 1e-14:
        raise MeasureError("zero variance: cannot standardize a Dirac measure")
    center = m1 if abs(m1) > 1e-15 else 0.0
    scale = float(np.sqrt(var))
    if center == 0.0 and abs(scale - 1.0) < 1e-15:
        return mu
    return mu.affine(center, scale)


def two_atom_skewed(p):
    """Standardized two-point law with weight ``p`` on the positive atom.

    The atoms are ``sqrt((1-p)/p)`` and ``-sqrt(p/(1-p))``; the third moment
    is ``(1 - 2p)/sqrt(p(1-p))`` and ``m_4 = m_3^2 + 1``.
    """
    if not 0.0 < p < 1.0:
        raise MeasureError("two_atom_skewed needs 0 < p < 1")
    q = 1.0 - p
    return Atomic([-np.sqrt(p / q), np.sqrt(q / p)], [q, p])


def symmetric_bernoulli():
    return Atomic([-1.0, 1.0], [0.5, 0.5])


def from_literal(literal):
    """Build a measure from its JSON literal (a dict)."""
    if not isinstance(literal, dict) or "type" not in literal:
        raise MeasureError("measure literal must be an object with a 'type' field")
    kind = literal["type"]
    try:
        if kind == "atomic":
            return Atomic.from_pairs(literal["atoms"])
        if kind == "semicircle":
            return Semicircle(float(literal.get("t", 1.0)))
        if kind == "two_atom":
            return two_atom_skewed(float(literal["p"]))
        if kind == "grid":
            return GridDensity(literal["lo"], literal["hi"], literal["nodes"], literal["values"])
        if kind == "arcsine":
            return Arcsine(float(literal.get("r", np.sqrt(2.0))))
        if kind == "free_meixner":
            return FreeMeixner(literal.get("a", 0.0), literal.get("b", 0.0), literal.get("d", 0.0))
    except KeyError as exc:
        raise MeasureError(f"measure literal of type {kind!r} is missing {exc}") from None
    raise MeasureError(f"unknown measure type {kind!r}")
