"""Invariant suites run by ``freeclt check``.

Every check returns a :class:`CheckResult`; a failing hard check makes the
command exit nonzero.  Diagnostics are reported but never fail the run.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .cauchy import extract_tau, laurent_moments_from_F
from .edgeworth import (ExpansionError, edgeworth_params, meixner_F, quintic_residual,
                        support_window)
from .functionals import (SEMICIRCLE_ENERGY, fisher, log_energy, log_potential,
                          relative_entropy, relative_fisher, semicircle_log_potential)
from .measures import Atomic, MeasureError, Semicircle, from_literal, standardize
from .rates import DENSITY_COLUMNS, ExperimentConfig, density_table, power_grid_density
from .subordination import (SolverError, build_truncated, operational_n1, solve_T,
                           solve_Z_many)


@dataclass
class CheckResult:
    name: str
    ok: bool
    value: object = None
    detail: str = ""
    hard: bool = True
    extra: dict = field(default_factory=dict)

    def as_dict(self):
        return {"name": self.name, "ok": bool(self.ok), "hard": self.hard,
                "value": self.value, "detail": self.detail, **self.extra}


def upper_grid(points=200):
    """Deterministic grid in the upper half-plane (log-spaced heights)."""
    side = int(np.ceil(np.sqrt(points)))
    xs = np.linspace(-4.0, 4.0, side)
    ys = np.geomspace(1e-2, 1e1, side)
    z = (xs[:, None] + 1j * ys[None, :]).ravel()
    return z[:points]


def check_literal(literal):
    """Literal-level invariants evaluated before parsing."""
    out = []
    if isinstance(literal, dict) and literal.get("type") == "atomic":
        try:
            total = float(sum(float(w) for _, w in literal["atoms"]))
        except (KeyError, TypeError, ValueError) as exc:
            out.append(CheckResult("atomic_literal_well_formed", False, detail=str(exc)))
            return out
        out.append(CheckResult("atomic_weights_sum_to_one", abs(total - 1.0) <= 1e-12, total,
                               f"weights sum to {total:.15g}"))
    try:
        from_literal(literal)
        out.append(CheckResult("measure_literal_parses", True))
    except MeasureError as exc:
        out.append(CheckResult("measure_literal_parses", False, detail=str(exc)))
    return out


def check_nevanlinna(mu, ns):
    z = upper_grid()
    g = mu.cauchy(z)
    F = 1.0 / g
    worst = float(max(np.max(g.imag), np.max(z.imag - F.imag)))
    out = [CheckResult("nevanlinna_signs", worst <= 1e-12, worst,
                       "max of Im G and Im z - Im F over the grid (must be <= 0)")]
    worst_Z = -np.inf
    for n in ns:
        sol = solve_Z_many(mu, n, z)
        worst_Z = max(worst_Z, float(np.max(z.imag - sol.Z_values.imag)))
    out.append(CheckResult("subordination_im_Z_ge_im_z", worst_Z <= 1e-12, worst_Z))
    return out


def check_subordination(mu, ns):
    z = upper_grid()
    worst = 0.0
    unconverged = 0
    for n in sorted(set([2] + list(ns))):
        sol = solve_Z_many(mu, n, z)
        worst = max(worst, float(np.max(sol.residuals / (1.0 + np.abs(z)))))
        unconverged += int((~sol.converged).sum())
    n1 = operational_n1(mu, list(ns), z)
    return [CheckResult("subordination_residual", worst < 1e-10 and unconverged == 0, worst,
                        f"max |nZ-(n-1)F(Z)-z|/(1+|z|); {unconverged} unconverged"),
            CheckResult("operational_n1", n1 is not None, n1,
                        f"diagnostic: all grid solves converge from n={n1}", hard=False)]


def hyperbolic_distance(a, b):
    return np.arccosh(1.0 + np.abs(a - b) ** 2 / (2.0 * a.imag * b.imag))


def check_denjoy_wolff(mu, ns, steps=60):
    """Undamped Picard iterates approach the fixed point in the hyperbolic metric.

    The map ``w -> (z + (n-1) F(w))/n`` is a holomorphic self-map of the
    upper half-plane, so by Schwarz-Pick the distance to its fixed point
    can never grow.
    """
    z = upper_grid(64)
    worst = -np.inf
    for n in ns:
        target = solve_Z_many(mu, n, z).Z_values
        w = z.copy()
        prev = hyperbolic_distance(w, target)
        for _ in range(steps):
            w = (z + (n - 1) / mu.cauchy(w)) / n
            cur = hyperbolic_distance(w, target)
            worst = max(worst, float(np.max(cur - prev)))
            prev = cur
    return [CheckResult("denjoy_wolff_monotone", worst <= 1e-8, worst,
                        "largest one-step increase of the hyperbolic distance")]


def check_tau(mu):
    if not isinstance(mu, Atomic) or mu.locations.size < 2:
        return []
    tau = extract_tau(mu)
    oracle = laurent_moments_from_F(tau.reciprocal, k_max=4,
                                    radius=2.0 * (np.abs(mu.locations).max() + 1.0))
    m = mu.moments(4)
    m0t, m1t, m2t = tau.moments
    relations = np.array([m0t, m1t, m2t + m0t ** 2])
    err_rel = float(np.max(np.abs(relations - m[2:5])))
    err_oracle = float(np.max(np.abs(oracle - m)))
    back = tau.measure()
    same = back.locations.size == mu.locations.size and \
        np.allclose(back.locations, mu.locations, atol=1e-10) and \
        np.allclose(back.weights, mu.weights, atol=1e-10)
    return [
        CheckResult("tau_nonnegative", bool(np.all(tau.masses >= 0)), float(tau.masses.min())),
        CheckResult("tau_moment_relations", err_rel < 1e-9, err_rel,
                    "m2=m0(tau), m3=m1(tau), m4=m2(tau)+m0(tau)^2"),
        CheckResult("tau_vs_laurent_oracle", err_oracle < 1e-8, err_oracle),
        CheckResult("tau_reconstruction", bool(same)),
    ]


def check_edgeworth(mu, ns, eps1_scale):
    out = []
    m = mu.moments(4)
    worst = 0.0
    for n in ns:
        try:
            p = edgeworth_params(m, n)
        except ExpansionError as exc:
            out.append(CheckResult(f"edgeworth_params_n{n}", False, detail=str(exc)))
            continue
        worst = max(worst, abs((p.d - p.b) - 1.0 / n))
        eta = build_truncated(mu, n).eta_n if isinstance(mu, Atomic) and \
            mu.locations.size >= 2 else 0.0
        try:
            w = support_window(p, eta, eps1_scale)
            nested = 0 < w.half_width_star <= w.half_width <= p.half_width
            out.append(CheckResult(f"support_window_n{n}", nested,
                                   [w.half_width_star, w.half_width, p.half_width]))
            out.append(CheckResult(f"support_window_regime_n{n}", w.regime_ok, w.eps1,
                                   "diagnostic: eps1 <= n", hard=False))
        except ExpansionError as exc:
            out.append(CheckResult(f"support_window_n{n}", False, detail=str(exc)))
    out.append(CheckResult("d_minus_b_equals_1_over_n", worst <= 1e-15, worst))
    z = upper_grid(100)
    gap = float(np.max(np.abs(meixner_F(0.0, 0.0, 0.0, z) - 1.0 / Semicircle(1.0).cauchy(z))))
    out.append(CheckResult("meixner_matches_semicircle", gap <= 1e-12, gap))
    return out


def check_truncation(mu, ns):
    if not isinstance(mu, Atomic) or mu.locations.size < 2:
        return []
    out = []
    zs = np.array([1.0 + 1.0j, -0.5 + 0.1j, 2.0 + 0.01j, 0.3 + 3.0j])
    for n in ns:
        ctx = build_truncated(mu, n)
        bad = [k for k, (_, _, ok) in ctx.checks.items() if not ok]
        out.append(CheckResult(f"truncation_moment_gaps_n{n}", not bad,
                               {k: [float(v[0]), float(v[1])] for k, v in ctx.checks.items()},
                               "failed: " + ", ".join(bad) if bad else ""))
        out.append(CheckResult(f"truncated_support_bound_n{n}", ctx.support_bound_holds(),
                               detail="diagnostic: expected only for large n", hard=False))
        T, sol = solve_T(ctx, zs)
        res = max(quintic_residual(ctx, n, z, t) / (1.0 + abs(z) ** 5) for z, t in zip(zs, T))
        out.append(CheckResult(f"quintic_residual_n{n}", res < 1e-8 and sol.all_converged, res))
    return out


def check_functionals(mu, ns, config):
    out = []
    xs = np.linspace(-2.0, 2.0, 41)
    w = Semicircle(1.0)
    err = float(np.max(np.abs(log_potential(w, xs) - semicircle_log_potential(xs))))
    out.append(CheckResult("semicircle_log_potential_oracle", err < 1e-6, err))
    e = log_energy(w).value
    out.append(CheckResult("semicircle_energy_oracle", abs(e - SEMICIRCLE_ENERGY) < 1e-6, e))
    phi = fisher(w).value
    out.append(CheckResult("semicircle_fisher_oracle", abs(phi - 1.0) < 1e-8, phi))
    if isinstance(mu, Semicircle):
        return out
    D_values = []
    for n in ns:
        try:
            dens, pd = power_grid_density(mu, n, config)
        except SolverError as exc:
            out.append(CheckResult(f"power_density_n{n}", False, detail=str(exc)))
            continue
        mass = pd.mass if pd is not None else 1.0
        m1, m2 = dens.moment(1), dens.moment(2)
        ok = abs(mass - 1) < 1e-8 and abs(m1) < 1e-8 and abs(m2 - 1) < 1e-8
        out.append(CheckResult(f"power_density_normalized_n{n}", ok, [mass, m1, m2]))
        d = relative_entropy(dens, panels=config.outer_panels)
        out.append(CheckResult(f"relative_entropy_nonnegative_n{n}",
                               d.value >= -d.estimated_abs_error, d.value))
        D_values.append((d.value, d.estimated_abs_error))
        f = relative_fisher(dens, panels=config.fisher_panels)
        out.append(CheckResult(f"relative_fisher_nonnegative_n{n}",
                               f.value >= -f.estimated_abs_error, f.value))
    out.append(CheckResult("relative_entropy_nonincreasing", D_nonincreasing(D_values),
                           [v for v, _ in D_values], "diagnostic", hard=False))
    return out


def D_nonincreasing(values):
    """``D(mu_n)`` nonincreasing along the list, up to the reported errors."""
    return all(b <= a + ea + eb for (a, ea), (b, eb) in zip(values[:-1], values[1:]))


def _csv_bytes(table):
    buf = io.StringIO()
    buf.write(",".join(DENSITY_COLUMNS) + "\n")
    for i in range(len(table["x"])):
        buf.write(",".join(f"{float(table[c][i]):.17g}" for c in DENSITY_COLUMNS) + "\n")
    return buf.getvalue().encode()


def check_determinism(mu, ns, config):
    n = ns[0]
    a = _csv_bytes(density_table(mu, n, config))
    b = _csv_bytes(density_table(mu, n, config))
    return [CheckResult("density_table_deterministic", a == b)]


def run_checks(config: ExperimentConfig):
    """Run every suite; returns the list of results (stops early on a bad literal)."""
    results = check_literal(config.measure)
    if not all(r.ok for r in results):
        return results
    try:
        mu = standardize(from_literal(config.measure))
    except MeasureError as exc:
        return results + [CheckResult("measure_standardizable", False, detail=str(exc))]
    ns = config.n_list
    for suite in (check_nevanlinna, check_subordination, check_denjoy_wolff):
        results += suite(mu, ns)
    results += check_tau(mu)
    results += check_edgeworth(mu, ns, config.eps1_scale)
    results += check_truncation(mu, ns)
    results += check_functionals(mu, ns, config)
    results += check_determinism(mu, ns, config)
    return results
