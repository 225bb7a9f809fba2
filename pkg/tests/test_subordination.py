import numpy as np
import pytest
from scipy.integrate import quad as scipy_quad

from freeclt.cauchy import TauRepresentation, extract_tau
from freeclt.edgeworth import edgeworth_params, v_n
from freeclt.measures import (Atomic, MeasureError, Semicircle, symmetric_bernoulli,
                              standardize, two_atom_skewed)
from freeclt.subordination import (SolverError, build_truncated, density_pn, eta_and_delta,
                                   T_lower_bound_ok, operational_n1, power_density,
                                   power_support, solve_T,
                                   solve_Z, solve_Z_many, transform_of_power)

from conftest import upper_points


def test_dirac_fixed_point():
    z = upper_points(20)
    sol = solve_Z_many(Atomic([0.0], [1.0]), 7, z)
    assert np.allclose(sol.Z_values, z, atol=1e-13)


def test_semicircle_n2_residual():
    w = Semicircle(1.0)
    Z, res, ok = solve_Z(w, 2, 3j)
    assert ok
    assert abs(2 * Z - 1 / w.cauchy(Z) - 3j) < 1e-12


def test_bernoulli_n2_quadratic():
    Z, _, ok = solve_Z(symmetric_bernoulli(), 2, 3j)
    assert ok
    assert Z == pytest.approx(1j * (3 + np.sqrt(13)) / 2, abs=1e-13)


def test_solver_contract_on_test_measures(test_measures):
    z = upper_points(200, seed=3)
    for name, mu in test_measures.items():
        for n in (2, 8, 32, 128):
            sol = solve_Z_many(mu, n, z)
            assert sol.all_converged, (name, n)
            assert np.all(sol.residuals < 1e-10 * (1 + np.abs(z))), (name, n)
            assert np.all(sol.Z_values.imag >= z.imag - 1e-14), (name, n)
            assert sol.iterations.max() <= 500


@pytest.mark.parametrize("n", [2, 8])
def test_solver_reaches_1e12(test_measures, n):
    z = upper_points(100, seed=5)
    z = z.real + 1j * np.maximum(z.imag, 1e-3)
    for mu in test_measures.values():
        sol = solve_Z_many(mu, n, z)
        assert np.all(sol.residuals < 1e-12 * (1 + np.abs(z)))


def test_pure_picard_agrees_with_default(test_measures):
    z = upper_points(40, seed=7)
    for mu in test_measures.values():
        for n in (2, 32):
            fast = solve_Z_many(mu, n, z)
            slow = solve_Z_many(mu, n, z, start="z", newton_switch=1e-6, max_iter=20000)
            assert slow.all_converged
            assert np.max(np.abs(fast.Z_values - slow.Z_values)) < 1e-9


def test_solver_rejects_bad_input():
    with pytest.raises(ValueError):
        solve_Z_many(Semicircle(1.0), 1, [1j])
    with pytest.raises(ValueError):
        solve_Z_many(Semicircle(1.0), 4, [1.0 + 0j])


def test_power_transform_semicircle_is_stable():
    w = Semicircle(1.0)
    for n in (2, 8, 64):
        assert transform_of_power(w, n, 1j) == pytest.approx(w.cauchy(1j), abs=1e-13)


def test_power_transform_bernoulli_is_arcsine():
    g = transform_of_power(symmetric_bernoulli(), 2, 2j)
    r = np.sqrt(2.0)
    re = scipy_quad(lambda t: np.real(1 / (2j - r * np.cos(t))) / np.pi, 0, np.pi)[0]
    im = scipy_quad(lambda t: np.imag(1 / (2j - r * np.cos(t))) / np.pi, 0, np.pi)[0]
    assert g == pytest.approx(re + 1j * im, abs=1e-12)


def test_power_transform_tail(test_measures):
    z = 1e6j
    for mu in test_measures.values():
        assert abs(transform_of_power(mu, 8, z) - 1 / z) < 10 * abs(z) ** -3


def test_power_moments_from_laurent(test_measures):
    z = 1e3j
    for mu in test_measures.values():
        g = transform_of_power(mu, 16, z)
        # at z = iy the m_1 and m_3 terms are real, the m_2 term imaginary
        head = (g - 1 / z) * z ** 2
        m1 = head.real
        m2 = (head - m1) * z
        assert abs(m1) < 1e-4 and abs(m2 - 1) < 1e-4


def test_semicircle_density_is_fixed():
    w = Semicircle(1.0)
    for n in (2, 4, 8):
        x = np.linspace(-1.95, 1.95, 79)
        pd = density_pn(w, n, x)
        assert np.max(np.abs(pd.grid.values - w.density(x))) < 1e-4


def test_bernoulli_n2_arcsine_density():
    x = np.linspace(-1.3, 1.3, 101)
    pd = density_pn(symmetric_bernoulli(), 2, x)
    exact = 1 / (np.pi * np.sqrt(2 - x * x))
    assert np.max(np.abs(pd.grid.values - exact)) < 1e-3


def test_bernoulli_n64_center_close_to_expansion():
    mu = symmetric_bernoulli()
    params = edgeworth_params(mu.moments(4), 64)
    pd = density_pn(mu, 64, np.array([-0.5, 0.0, 0.5]))
    assert abs(pd.grid.values[1] - v_n(params, 0.0 - params.a)) < 0.02


def test_two_atom_support_closed_form():
    mu = two_atom_skewed(0.8)
    for n in (4, 16, 64):
        (lo, hi), = power_support(mu, n)
        rn = np.sqrt(n)
        assert lo == pytest.approx((-1.5 - 2 * np.sqrt(n - 1)) / rn, abs=1e-10)
        assert hi == pytest.approx((-1.5 + 2 * np.sqrt(n - 1)) / rn, abs=1e-10)


def test_power_density_standardized():
    pd = power_density(two_atom_skewed(0.8), 16)
    g = pd.grid
    assert pd.mass == pytest.approx(1.0, abs=1e-12)
    assert g.moment(1) == pytest.approx(0.0, abs=1e-12)
    assert g.moment(2) == pytest.approx(1.0, abs=1e-12)
    assert g.moment(3) * 4 == pytest.approx(-1.5, abs=1e-10)


def test_flag_rate_limit():
    x = np.linspace(-1.414, 1.414, 41)
    with pytest.raises(SolverError, match="flagged"):
        density_pn(symmetric_bernoulli(), 2, x, method="richardson", max_flag_rate=0.0)


def test_eta_compact_tau():
    tau = TauRepresentation([-1.5], [1.0])
    for n in (32, 64, 128):
        eta, delta = eta_and_delta(tau, n)
        assert delta == pytest.approx(1.5 / np.sqrt(n - 1), rel=1e-9)
        assert eta == pytest.approx(delta, rel=1e-9)


def test_eta_needs_second_moment():
    with pytest.raises(MeasureError):
        eta_and_delta(TauRepresentation([0.0], [1.0]), 8)


def test_eta_monotone_for_two_atom_tau():
    tau = TauRepresentation([-1.5, 1.5], [0.5, 0.5])
    etas = [eta_and_delta(tau, n)[0] for n in (4, 8, 16, 32, 64, 128, 256)]
    assert np.all(np.diff(etas) <= 1e-12)


def test_truncation_without_cut():
    mu = Atomic(np.array([-1.0, 0.0, 1.0]) * np.sqrt(1.5), [1 / 3, 1 / 3, 1 / 3])
    ctx = build_truncated(mu, 128)
    assert ctx.tail_mass == 0.0
    assert np.allclose(ctx.mu_star.locations, mu.locations, atol=1e-12)
    assert all(ok for _, _, ok in ctx.checks.values())


def test_truncation_drops_outer_atom():
    mu = two_atom_skewed(0.8)
    ctx = build_truncated(mu, 8)
    assert ctx.tau_star.locations.size == 0
    assert ctx.tail_mass == pytest.approx(ctx.tau.total_mass)
    assert ctx.mu_star.moment(2) == pytest.approx(mu.moment(2) - ctx.tail_mass, abs=1e-12)
    assert abs(ctx.mu_star.moment(1)) <= 1e-12


def test_truncation_sanity_over_n():
    mu = Atomic([-1.0, 0.2, 3.0], [0.3, 0.5, 0.2])
    mu = standardize(mu)
    ns = [8, 16, 32, 64, 128, 256]
    ctxs = [build_truncated(mu, n) for n in ns]
    etas = [c.eta_n for c in ctxs]
    tails = [c.tail_mass for c in ctxs]
    assert np.all(np.diff(etas) <= 1e-12) and etas[-1] < 0.1
    assert np.all(np.diff(tails) <= 1e-12) and tails[-1] == 0.0
    for c in ctxs:
        assert abs(c.mu_star.moment(1)) <= 1e-12


def test_T_lower_bound_for_large_n():
    ctx = build_truncated(two_atom_skewed(0.8), 128)
    z = upper_points(100, seed=11) / 3
    T, sol = solve_T(ctx, z)
    assert sol.all_converged
    assert np.all(np.abs(T) >= 1.03 / 3)
    assert np.all(T_lower_bound_ok(np.sqrt(128) * T, 128))


def test_operational_n1(test_measures, monkeypatch):
    import freeclt.subordination as sub
    z = upper_points(40, seed=5)
    assert operational_n1(test_measures["two_atom_08"], [2, 8, 32], z) == 2
    # with no iterations allowed the semicircle start never meets the tolerance
    orig = sub.solve_Z_many
    monkeypatch.setattr(sub, "solve_Z_many",
                        lambda mu, n, zz: orig(mu, n, zz, max_iter=0, start="semicircle"))
    assert operational_n1(test_measures["skew_three"], [2, 8], z) is None
