import numpy as np
import pytest

from freeclt import quadrature as quad


def test_panel_rule_integrates_polynomials():
    x, w = quad.panel_rule(np.linspace(0.0, 2.0, 5), order=8)
    assert np.sum(w * x ** 7) == pytest.approx(2.0 ** 8 / 8, rel=1e-14)


def test_graded_edges_refine_toward_start():
    edges = quad.graded_edges(1.0, 0.0, ratio=0.2, smallest=1e-10)
    assert edges[0] == 1.0 and edges[-1] == pytest.approx(0.0)
    widths = np.abs(np.diff(edges))
    assert widths[0] < 1e-9
    assert np.all(np.diff(edges) < 0)


def test_graded_rule_handles_log_singularity():
    edges = quad.graded_edges(0.0, 1.0)
    x, w = quad.panel_rule(edges, 16)
    assert np.sum(w * np.log(x)) == pytest.approx(-1.0, abs=1e-13)


def test_chebyshev_nodes_detected():
    nodes = quad.chebyshev_nodes(-1.5, 2.0, 40)
    assert np.all(np.diff(nodes) > 0)
    assert quad.is_chebyshev_grid(-1.5, 2.0, nodes)
    assert not quad.is_chebyshev_grid(-1.5, 2.0, np.linspace(-1.4, 1.9, 40))


def test_barycentric_reproduces_polynomial():
    t = quad.chebyshev_nodes(-1.0, 1.0, 12)
    poly = np.polynomial.Polynomial([0.3, -1.0, 0.0, 2.0, 0.5])
    s = np.linspace(-0.99, 0.99, 31)
    assert np.allclose(quad.chebyshev_barycentric(t, poly(t), s), poly(s), atol=1e-13)
    # nodes themselves are returned exactly
    assert np.array_equal(quad.chebyshev_barycentric(t, poly(t), t[:3]), poly(t[:3]))


def test_angle_rule_semicircle_mass():
    x, w = quad.angle_rule(-2.0, 2.0, panels=4, order=16)
    p = np.sqrt(4 - x * x) / (2 * np.pi)
    assert np.sum(w * p) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("a,b,alpha,beta", [(0.1, 0.3, 1.0, 0.0), (0.2, 0.05, 0.7, -2.0),
                                            (0.0, 0.4, 1.5, 3.0)])
def test_log_linear_cell_matches_quadrature(a, b, alpha, beta):
    exact = quad.log_linear_cell(a, b, alpha, beta)
    total = 0.0
    for lo, hi in ((-a, 0.0), (0.0, b)):
        if hi > lo:
            edges = quad.graded_edges(0.0, lo if lo < 0 else hi)
            x, w = quad.panel_rule(edges, 16)
            total += np.sum(np.abs(w) * np.log(np.abs(x)) * (alpha + beta * x))
    assert exact == pytest.approx(total, abs=1e-13)


def test_pairwise_sum_is_order_stable():
    v = np.full(1001, 0.1)
    assert quad.pairwise_sum(v) == pytest.approx(100.1, rel=1e-15)
    assert quad.pairwise_sum([]) == 0.0
