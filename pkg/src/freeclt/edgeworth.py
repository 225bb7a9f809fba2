"""Edgeworth-type correction to the semicircle density and free Meixner laws.

The approximation to ``p_n(x + a_n)`` is

    v_n(x) = (1 + d_n/2 - a_n^2 - 1/n - a_n x - (b_n - a_n^2 - 1/n) x^2) p_w(e_n x)

with ``a_n = m_3/sqrt(n)``, ``b_n = (m_4 - m_3^2 - 1)/n``,
``d_n = (m_4 - m_3^2)/n`` and ``e_n = (1 - b_n)/sqrt(1 - d_n)``.  Its
reciprocal-Cauchy counterpart is the free Meixner transform ``M_n``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .measures import FreeMeixner, MeasureError
from .subordination import TruncationContext, solve_T


class ExpansionError(ValueError):
    pass


class BranchError(ArithmeticError):
    pass


@dataclass(frozen=True)
class EdgeworthParams:
    n: int
    a: float
    b: float
    d: float

    @property
    def e(self):
        return (1.0 - self.b) / np.sqrt(1.0 - self.d)

    @property
    def half_width(self):
        """Half-width ``2/e_n`` of the approximate support."""
        return 2.0 / self.e

    def meixner(self):
        return FreeMeixner(self.a, self.b, self.d)


def edgeworth_params(moments, n):
    """Parameters from a moment vector ``m[0..4]`` of a standardized law.

    Raises
    ------
    ExpansionError
        If ``b_n >= 1`` or ``d_n >= 1`` (the expansion is undefined).
    """
    m = np.asarray(moments, dtype=float)
    if m.size < 5:
        raise ValueError("need moments m_0..m_4")
    if abs(m[1]) > 1e-9 or abs(m[2] - 1.0) > 1e-9:
        raise ValueError("edgeworth_params needs a standardized law (m_1 = 0, m_2 = 1)")
    m3, m4 = m[3], m[4]
    a = m3 / np.sqrt(n)
    d = (m4 - m3 * m3) / n
    b = d - 1.0 / n  # keeps d_n - b_n = 1/n exact
    if b >= 1.0 or d >= 1.0:
        raise ExpansionError(f"expansion undefined at n={n} (b_n={b:.4g}, d_n={d:.4g})")
    return EdgeworthParams(int(n), float(a), float(b), float(d))


def semicircle_density(x):
    x = np.asarray(x, dtype=float)
    return np.sqrt(np.maximum(4.0 - x * x, 0.0)) / (2.0 * np.pi)


def v_n(params: EdgeworthParams, x, inv_n=None):
    """Signed expansion density (never clamped).

    ``inv_n`` overrides the explicit ``1/n`` terms (pass 0 for the limit
    object with all corrections removed).
    """
    a, b, d = params.a, params.b, params.d
    c = 1.0 / params.n if inv_n is None else inv_n
    x = np.asarray(x, dtype=float)
    e = (1.0 - b) / np.sqrt(1.0 - d)
    poly = 1.0 + 0.5 * d - a * a - c - a * x - (b - a * a - c) * x * x
    return poly * semicircle_density(e * x)


def v_n_integral(params: EdgeworthParams):
    """Closed-form ``int v_n`` (uses ``int p_w(e x) dx = 1/e``, ``int x^2 p_w(e x) dx = 1/e^3``)."""
    a, b, d, e, c = params.a, params.b, params.d, params.e, 1.0 / params.n
    return (1.0 + 0.5 * d - a * a - c) / e - (b - a * a - c) / e ** 3


def v_n_first_moment(params: EdgeworthParams):
    return -params.a / params.e ** 3


@dataclass(frozen=True)
class SupportWindow:
    """Windows ``I_n`` and ``I_n^*`` around ``a_n``.

    ``eps1`` stands in for the unspecified sequence ``eps_{n1}``; it is
    ``eps1_scale * (eta_n + 1/sqrt(n))``.  When ``eps1 > n`` the star
    window is clamped to ``I_n`` and ``regime_ok`` is False.
    """

    center: float
    half_width: float
    half_width_star: float
    eps1: float
    regime_ok: bool = True

    def contains(self, x, star=True):
        hw = self.half_width_star if star else self.half_width
        return np.abs(np.asarray(x) - self.center) <= hw


def support_window(params: EdgeworthParams, eta_n, eps1_scale=1.0):
    eps1 = eps1_scale * (eta_n + 1.0 / np.sqrt(params.n))
    if not eps1 > 0:
        raise ExpansionError("support window degenerate: eps1 must be positive")
    outer = params.half_width
    hw = outer - eps1 / params.n
    hw_star = min(outer - np.sqrt(eps1 / params.n), hw)
    if hw_star <= 0 or hw <= 0:
        raise ExpansionError(f"support window degenerate at n={params.n} (eps1={eps1:.3g})")
    return SupportWindow(params.a, hw, hw_star, eps1, bool(eps1 <= params.n))


def meixner_F(a, b, d, z, path=False, jump_tol=None):
    """Free Meixner reciprocal Cauchy transform ``M(z)``.

    The square root has its cut on the support and behaves like
    ``(1 - b)(z - a)`` at infinity, so ``Im z > 0`` implies ``Im M(z) >= 0``.
    With ``path=True`` the input is treated as an ordered path and a jump
    larger than ``jump_tol`` (default: 10 x the largest step times the
    Lipschitz bound) raises :class:`BranchError`.
    """
    if not (b < 1 and d < 1):
        raise MeasureError("meixner_F needs b < 1 and d < 1")
    law = FreeMeixner(a, b, d)
    out = law.reciprocal(z)
    if path:
        z = np.asarray(z, dtype=complex)
        dz = np.abs(np.diff(z))
        dm = np.abs(np.diff(out))
        dist = np.abs(np.abs(z - a) - law.half_width)
        lip = 1.0 + (1.0 - b) / np.sqrt(np.maximum(dist[:-1], 1e-300))
        limit = jump_tol if jump_tol is not None else 10.0 * dz * lip
        if np.any(dm > limit):
            k = int(np.argmax(dm - limit))
            raise BranchError(f"branch discontinuity between {z[k]} and {z[k + 1]}")
    return out


def meixner_density(a, b, d, x):
    """Absolutely continuous part of the free Meixner law.

    Raises
    ------
    MeasureError
        If ``f(x) = b x^2 + a(1 - b) x + 1 - d`` is not positive on the
        whole support (the formula is invalid there).
    """
    law = FreeMeixner(a, b, d)
    lo, hi = law.support()
    check = np.linspace(lo, hi, 257)
    fx = law.f_poly(check)
    # the minimum of a quadratic may fall between check points
    if b != 0:
        vertex = -a * (1 - b) / (2 * b)
        if lo < vertex < hi:
            fx = np.append(fx, law.f_poly(vertex))
    if np.any(fx <= 0):
        raise MeasureError("absolutely continuous form invalid for these parameters")
    return law.density(x)


def quintic_coefficients(ctx: TruncationContext, z, T):
    """Coefficients (highest degree first) of ``Q(z, w)`` at one point.

    ``zeta_1 = int u^5 mu*(du) / (W - u)`` with ``W = sqrt(n) T``.  The
    ``w^2`` coefficient carries the factor ``m_2(mu*)`` that comes out of
    the expansion of ``G_{mu*}``.
    """
    n = ctx.n
    mu = ctx.mu_star
    rn = np.sqrt(n)
    m2, m3, m4 = mu.moment(2), mu.moment(3), mu.moment(4)
    W = rn * T
    zeta1 = np.sum(mu.weights * mu.locations ** 5 / (W - mu.locations))
    zeta2 = m3 - m2 * z / rn
    zeta3 = m4 + zeta1 - z * m3 / rn
    zeta4 = m4 + zeta1
    return np.array([1.0, -z, m2, zeta2 / rn, zeta3 / n, -zeta4 * z / n ** 2], dtype=complex)


def quintic_residual(ctx: TruncationContext, n, z, T_value):
    """``|Q(z, T_n(z))|``; zero up to rounding when ``T_value`` is exact."""
    if n != ctx.n:
        raise ValueError("context was built for a different n")
    coeffs = quintic_coefficients(ctx, complex(z), complex(T_value))
    return float(abs(np.polyval(coeffs, complex(T_value))))


def meixner_gap_grid(params: EdgeworthParams, window: SupportWindow, nx=41,
                     imag_parts=(0.01, 0.03, 0.1, 0.3, 1.0, 3.0)):
    """Rectangle grid ``0 < Im z <= 3``, ``|Re z - a_n| <= I_n`` half-width."""
    xs = window.center + np.linspace(-window.half_width, window.half_width, nx)
    return (xs[:, None] + 1j * np.asarray(imag_parts)[None, :]).ravel()


def meixner_gap(ctx_or_measure, params: EdgeworthParams, grid, T_values=None):
    """``sup |T_n(z) - M_n(z)| * sqrt|(e_n (z - a_n))^2 - 4|`` over the grid.

    ``ctx_or_measure`` is a :class:`TruncationContext` (``T_n`` from the
    truncated law) or any measure (then the untruncated ``S_n`` is used).
    Returns ``(gap, per_point)``.
    """
    grid = np.asarray(grid, dtype=complex)
    if T_values is None:
        if isinstance(ctx_or_measure, TruncationContext):
            T_values, _ = solve_T(ctx_or_measure, grid)
        else:
            from .subordination import subordination_S
            T_values, _ = subordination_S(ctx_or_measure, params.n, grid)
    M = meixner_F(params.a, params.b, params.d, grid)
    weight = np.sqrt(np.abs((params.e * (grid - params.a)) ** 2 - 4.0))
    per_point = np.abs(T_values - M) * weight
    return float(per_point.max()), per_point


def shape_observable(density, params: EdgeworthParams, window: SupportWindow, points=801):
    """``sup_{I_n^*} |p_n(x + a_n) - v_n(x)| (4 - (e_n x)^2)^{3/2}``.

    ``density`` is a callable returning ``p_n`` at real points; ``x``
    runs over the shifted window ``|x| <= half_width_star``.
    """
    hw = window.half_width_star
    x = np.linspace(-hw, hw, points)
    diff = np.abs(np.asarray(density(x + params.a)) - v_n(params, x))
    weight = np.maximum(4.0 - (params.e * x) ** 2, 0.0) ** 1.5
    return float(np.max(diff * weight))
