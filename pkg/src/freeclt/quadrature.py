"""Quadrature helpers shared by the measure, transform and functional code.

Everything here works in the angle variable ``x = c + r cos(theta)`` where
useful, because every density we handle vanishes like a square root at the
ends of its support and becomes smooth after that substitution.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def gauss_legendre(order):
    """Nodes and weights of the Gauss-Legendre rule on [-1, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def panel_rule(edges, order=16):
    """Composite Gauss-Legendre rule over consecutive panels.

    Parameters
    ----------
    edges : array_like
        Panel boundaries, monotone.
    order : int
        Points per panel.

    Returns
    -------
    nodes, weights : ndarray
        Flattened nodes and weights (weights carry the sign of the panel
        orientation).
    """
    edges = np.asarray(edges, dtype=float)
    x, w = gauss_legendre(order)
    lo, hi = edges[:-1, None], edges[1:, None]
    half = 0.5 * (hi - lo)
    nodes = lo + half * (x + 1.0)
    weights = half * w
    return nodes.ravel(), weights.ravel()


def graded_edges(a, b, ratio=0.2, smallest=1e-13, max_width=np.pi / 8):
    """Panel boundaries on [a, b] refined geometrically toward ``a``.

    Suitable for integrands with an integrable (logarithmic or power)
    singularity at ``a``.  ``b`` may be smaller than ``a``.
    """
    length = b - a
    if length == 0.0:
        return np.array([a, b])
    scale = abs(length)
    widths = [1.0]
    while widths[-1] * scale > smallest:
        widths.append(widths[-1] * ratio)
    widths = np.array(widths[::-1])
    edges = np.concatenate([[0.0], widths])
    # split the coarse panels so no panel is wider than max_width
    out = [edges[0]]
    for lo, hi in zip(edges[:-1], edges[1:]):
        pieces = max(1, int(np.ceil((hi - lo) * scale / max_width)))
        out.extend(lo + (hi - lo) * np.arange(1, pieces + 1) / pieces)
    return a + length * np.array(out)


def chebyshev_nodes(lo, hi, m):
    """Chebyshev points of the first kind on (lo, hi), increasing."""
    theta = (np.arange(m)[::-1] + 0.5) * np.pi / m
    return 0.5 * (lo + hi) + 0.5 * (hi - lo) * np.cos(theta)


def is_chebyshev_grid(lo, hi, nodes, rtol=1e-10):
    nodes = np.asarray(nodes, dtype=float)
    ref = chebyshev_nodes(lo, hi, nodes.size)
    return np.allclose(nodes, ref, rtol=0.0, atol=rtol * (hi - lo))


def chebyshev_barycentric(t_nodes, values, t):
    """Barycentric interpolation through Chebyshev points of the first kind.

    ``t_nodes`` must be the increasing first-kind points on [-1, 1]; the
    weights are then known in closed form and the formula is stable.
    """
    m = t_nodes.size
    j = np.arange(m)[::-1]
    theta = (j + 0.5) * np.pi / m
    w = (-1.0) ** j * np.sin(theta)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    diff = t[:, None] - t_nodes[None, :]
    exact = diff == 0.0
    diff[exact] = 1.0
    tmp = w / diff
    out = (tmp @ values) / tmp.sum(axis=1)
    hit = exact.any(axis=1)
    if hit.any():
        out[hit] = values[np.argmax(exact[hit], axis=1)]
    return out


def angle_rule(lo, hi, panels=16, order=16):
    """Rule for integrals over [lo, hi] in the angle variable.

    Returns points ``x`` and weights ``w`` with ``sum(w f(x))`` approximating
    the integral of ``f`` over [lo, hi]; the Jacobian ``r sin(theta)`` is
    folded into the weights.
    """
    theta, wt = panel_rule(np.linspace(0.0, np.pi, panels + 1), order)
    c, r = 0.5 * (lo + hi), 0.5 * (hi - lo)
    return c + r * np.cos(theta), wt * r * np.sin(theta)


def log_linear_cell(a, b, alpha, beta):
    """Exact integral of ``log|t| (alpha + beta t)`` for ``t`` in [-a, b].

    ``a, b >= 0``.  Used on the cell containing the logarithmic singularity.
    """
    def xlogx(s):
        return s * np.log(s) - s if s > 0 else 0.0

    def x2logx(s):
        return 0.5 * s * s * np.log(s) - 0.25 * s * s if s > 0 else 0.0

    return alpha * (xlogx(b) + xlogx(a)) + beta * (x2logx(b) - x2logx(a))


def pairwise_sum(values):
    """Deterministic pairwise summation (independent of thread layout)."""
    v = np.asarray(values, dtype=float).ravel()
    while v.size > 1:
        if v.size % 2:
            v = np.append(v, 0.0)
        v = v[0::2] + v[1::2]
    return float(v[0]) if v.size else 0.0
