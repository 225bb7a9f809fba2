import json

import numpy as np
import pytest

from freeclt.cli import EXIT_CONFIG, EXIT_FAILED_CHECK, EXIT_OK, main
from freeclt.rates import (ConfigError, ExperimentConfig, fit_rates, fit_slope, format_float,
                           map_over_n)


def test_fit_slope_examples():
    ns = np.array([8, 16, 32, 64, 128], dtype=float)
    assert fit_slope(ns, 3.0 / ns)[0] == pytest.approx(-1.0, abs=1e-12)
    slope, icpt, r2 = fit_slope(ns, 2.0 / np.sqrt(ns))
    assert slope == pytest.approx(-0.5, abs=1e-12)
    assert icpt == pytest.approx(np.log(2.0))
    assert r2 == pytest.approx(1.0)
    mixed = fit_slope(ns, 1.0 / ns + 2.0 / ns ** 2)[0]
    assert -1.2 < mixed < -1.0


def test_fit_slope_drops_and_rejects():
    ns = [8, 16, 32, 64, 128]
    with pytest.warns(RuntimeWarning, match="dropped 1"):
        fit_slope(ns, [1 / 8, 1 / 16, 0.0, 1 / 64, 1 / 128])
    with pytest.raises(ValueError, match="at least 4"):
        with pytest.warns(RuntimeWarning):
            fit_slope(ns, [1.0, -1.0, 0.0, 1.0, 2.0])
    with pytest.raises(ValueError):
        fit_slope([1, 2, 3], [1, 2])


def test_fit_rates_statuses():
    ns = [8, 16, 32, 64, 128]
    rows = [{"n": n, "D": 0.1 / n, "Phi_rel": 0.5 / n, "L1": 0.3 / np.sqrt(n),
             "meixner_gap": 0.0} for n in ns]
    fits = {f["quantity"]: f for f in fit_rates(rows, m3=-0.75)}
    assert fits["D"]["ok"] and fits["L1"]["ok"] and fits["Phi_rel"]["ok"]
    assert fits["meixner_gap"]["status"] == "degenerate"
    sym = {f["quantity"]: f for f in fit_rates(rows, m3=0.0)}
    assert sym["D"]["band"] == [None, -1.0]


def test_config_validation(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig(n_list=[])
    with pytest.raises(ConfigError):
        ExperimentConfig(n_list=[8, 4])
    with pytest.raises(ConfigError):
        ExperimentConfig(n_list=[1, 2, 3])
    with pytest.raises(ConfigError):
        ExperimentConfig(density_method="magic")
    with pytest.raises(ConfigError, match="unknown config keys"):
        ExperimentConfig.from_dict({"seed": 3})
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        ExperimentConfig.load(path)
    cfg = ExperimentConfig.from_dict(ExperimentConfig().to_dict())
    assert cfg.to_dict() == ExperimentConfig().to_dict()


def test_format_float_round_trips():
    for v in (0.1, 1 / 3, -2.5e-17, 123456789.123):
        assert float(format_float(v)) == v
    assert format_float(np.int64(7)) == "7"


def test_map_over_n_keeps_order(monkeypatch):
    monkeypatch.setenv("FREECLT_THREADS", "4")
    assert map_over_n(lambda n: n * n, [5, 1, 3, 2]) == [25, 1, 9, 4]


def _write_config(tmp_path, **kwargs):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(kwargs))
    return str(path)


def test_cli_check_passes(tmp_path, capsys):
    cfg = _write_config(tmp_path, n_list=[8, 16, 32])
    assert main(["check", "--config", cfg, "--out", str(tmp_path / "out")]) == EXIT_OK
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["passed"] and not summary["failed"]
    assert "PASS subordination_residual" in capsys.readouterr().out


def test_cli_check_names_broken_literal(tmp_path, capsys):
    cfg = _write_config(tmp_path, measure={"type": "atomic", "atoms": [[-1, 0.45], [1, 0.45]]})
    assert main(["check", "--config", cfg, "--out", str(tmp_path)]) == EXIT_FAILED_CHECK
    assert "FAIL atomic_weights_sum_to_one" in capsys.readouterr().out


def test_cli_check_flags_degenerate_window(tmp_path, capsys):
    cfg = _write_config(tmp_path, n_list=[8, 16], eps1_scale=0.0)
    assert main(["check", "--config", cfg, "--out", str(tmp_path)]) == EXIT_FAILED_CHECK
    assert "FAIL support_window_n8" in capsys.readouterr().out


def test_cli_config_errors(tmp_path):
    cfg = _write_config(tmp_path, n_list=[])
    assert main(["density", "--config", cfg, "--out", str(tmp_path)]) == EXIT_CONFIG
    cfg = _write_config(tmp_path, measure={"type": "atomic", "atoms": [[0, 1.0]]})
    assert main(["density", "--config", cfg, "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["density", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG


def test_cli_density_tables(tmp_path):
    cfg = _write_config(tmp_path, n_list=[2, 8], measure={"type": "two_atom", "p": 0.5})
    out = tmp_path / "a"
    assert main(["density", "--config", cfg, "--out", str(out)]) == EXIT_OK
    data = np.loadtxt(out / "density_n2.csv", delimiter=",", skiprows=1)
    x, p = data[:, 0], data[:, 1]
    # two-fold free convolution of the symmetric Bernoulli law is arcsine on (-sqrt 2, sqrt 2)
    assert np.allclose(p, 1 / (np.pi * np.sqrt(2 - x * x)), rtol=1e-8)
    header = (out / "density_n8.csv").read_text().splitlines()[0]
    assert header == "x,p_n,v_n,weighted_residual,flagged"


def test_cli_semicircle_density_column(tmp_path):
    cfg = _write_config(tmp_path, n_list=[4], measure={"type": "semicircle", "t": 1.0})
    assert main(["density", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    data = np.loadtxt(tmp_path / "density_n4.csv", delimiter=",", skiprows=1)
    assert np.allclose(data[:, 1], np.sqrt(4 - data[:, 0] ** 2) / (2 * np.pi), atol=1e-15)


def test_cli_outputs_deterministic(tmp_path, monkeypatch):
    cfg = _write_config(tmp_path, n_list=[8, 16, 32, 64])
    runs = []
    for k, threads in enumerate(("1", "1", "4")):
        monkeypatch.setenv("FREECLT_THREADS", threads)
        out = tmp_path / f"run{k}"
        main(["density", "--config", cfg, "--out", str(out)])
        main(["entropy", "--config", cfg, "--out", str(out / "e")])
        runs.append([(out / f"density_n{n}.csv").read_bytes() for n in (8, 64)]
                    + [(out / "e" / "entropy.csv").read_bytes()])
    assert runs[0] == runs[1] == runs[2]


def test_cli_rates_summary(tmp_path):
    cfg = _write_config(tmp_path, n_list=[8, 16, 32, 64])
    code = main(["rates", "--config", cfg, "--out", str(tmp_path)])
    summary = json.loads((tmp_path / "summary.json").read_text())
    gated = [f for f in summary["fits"] if f["quantity"] in ("D", "Phi_rel", "L1")]
    assert code == (EXIT_OK if all(f["ok"] for f in gated) else EXIT_FAILED_CHECK)
    assert summary["m3"] == pytest.approx(-1.5)
    rows = (tmp_path / "rates.csv").read_text().splitlines()
    assert rows[0].startswith("n,D,nD") and len(rows) == 5


def test_rates_symmetric_bernoulli():
    from freeclt.rates import compute_rate_table
    table = compute_rate_table(ExperimentConfig(measure={"type": "two_atom", "p": 0.5}))
    fits = {f["quantity"]: f for f in table.fits}
    assert fits["D"]["band"] == [None, -1.0] and fits["D"]["ok"]
    assert np.all(table.column("nD") < 0.1)
    # the law of a sum of free Bernoulli variables is exactly of Meixner type
    assert fits["meixner_gap"]["status"] == "degenerate"


def test_rates_semicircle_is_degenerate(tmp_path):
    cfg = _write_config(tmp_path, measure={"type": "semicircle", "t": 1.0})
    assert main(["rates", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    summary = json.loads((tmp_path / "summary.json").read_text())
    status = {f["quantity"]: f["status"] for f in summary["fits"]}
    assert status["D"] == status["Phi_rel"] == status["L1"] == "degenerate"
