import numpy as np
import pytest

from hiermap.cli import main
from hiermap.experiments import (
    ExperimentConfig,
    cmd_diverge,
    cmd_reconstruct,
    cmd_sample_prior,
    cmd_sweep,
    cmd_verify,
    metrics_from_files,
    load_truth,
)
from hiermap.io import ConfigError, read_csv, write_signal_csv


def cfg(**kw):
    base = dict(n=(7,), eps=(0.02,), seed=1)
    base.update(kw)
    return ExperimentConfig(**base)


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig(command="bogus")
    with pytest.raises(ConfigError):
        ExperimentConfig(eps=(-1.0,))
    with pytest.raises(ConfigError):
        ExperimentConfig(s=0.7)
    with pytest.raises(ConfigError):
        ExperimentConfig(signal="custom-file")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_mapping({"nonsense": "1"})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_mapping({"n": "9.5"})
    c = ExperimentConfig.from_mapping({"n": "9, 10", "eps": "0.02,0.01", "lambda": "14", "max-iter": "3"})
    assert c.n == (9, 10) and c.eps == (0.02, 0.01) and c.lam == 14.0 and c.max_iter == 3


def test_config_text_round_trip():
    c = cfg(lam=14.0, eps=(0.02, 1 / 3))
    from hiermap.io import parse_config_text

    again = ExperimentConfig.from_mapping(parse_config_text(c.to_text()))
    assert again == c


def test_reconstruct_record_and_files(tmp_path):
    c = cfg(out_dir=str(tmp_path))
    rec = cmd_reconstruct(c)
    assert rec.metrics["well_count"] == 2
    assert rec.stop_reason in ("decrease-below-delta", "max-iterations", "line-search-stalled")
    for name in ("u.csv", "v.csv", "m.csv", "trace.csv", "metrics.csv", "metadata.csv", "config.txt", "plot.svg"):
        assert (rec.run_dir / name).exists()
    again = metrics_from_files(rec.run_dir, 0.02, load_truth(c))
    for key, val in rec.metrics.items():
        if key in again:
            np.testing.assert_array_equal(np.asarray(again[key]), np.asarray(val))
    header, rows = read_csv(rec.run_dir / "trace.csv")
    assert header[0] == "iteration" and header[-1] == "total"
    totals = [float(r[-1]) for r in rows]
    assert np.all(np.diff(totals) <= 0)
    meta = dict(read_csv(rec.run_dir / "metadata.csv")[1])
    assert "omp_num_threads" in meta and "numpy" in meta


def test_reconstruct_deterministic():
    a, b = cmd_reconstruct(cfg()), cmd_reconstruct(cfg())
    np.testing.assert_array_equal(a.u, b.u)
    np.testing.assert_array_equal(a.v, b.v)


def test_reconstruct_noiseless_constant(tmp_path):
    n = 64
    write_signal_csv(tmp_path / "c.csv", np.arange(n) / n, np.full(n, 0.4))
    c = cfg(signal="custom-file", signal_file=str(tmp_path / "c.csv"), sigma=1e-9)
    rec = cmd_reconstruct(c)
    assert np.max(np.abs(rec.u - 0.4)) < 1e-6


def test_custom_file_validation(tmp_path):
    write_signal_csv(tmp_path / "bad.csv", np.arange(6) / 6, np.zeros(6))
    with pytest.raises(ConfigError):
        load_truth(cfg(signal="custom-file", signal_file=str(tmp_path / "bad.csv")))
    with pytest.raises(ConfigError):
        load_truth(cfg(signal="custom-file", signal_file=str(tmp_path / "missing.csv")))


def test_piecewise_smooth_wells():
    rec = cmd_reconstruct(cfg(signal="piecewise-smooth", n=(9,), eps=(0.02,)))
    assert rec.metrics["well_count"] <= 4


def test_sweep(tmp_path):
    res = cmd_sweep(cfg(n=(7, 8), out_dir=str(tmp_path)))
    kinds = {r["kind"] for r in res.rows}
    assert {"n-distance", "fidelity-over-eps", "deepest-well", "well-count"} <= kinds
    assert (tmp_path / "sweep.csv").exists()
    with pytest.raises(ConfigError):
        cmd_sweep(cfg())


def test_diverge(tmp_path):
    res = cmd_diverge(cfg(alpha=0.0, n=(6, 7, 8, 9, 10, 11, 12), eps=(0.01,), out_dir=str(tmp_path)))
    assert np.all(np.diff(res.table[:, 2]) < 0)
    with pytest.raises(ConfigError):
        cmd_diverge(cfg(alpha=1.0))


def test_diverge_full_solves():
    res = cmd_diverge(cfg(alpha=0.0, n=(5, 6, 7), eps=(0.01,), full_solves=True))
    mx = [s["max_v"] for s in res.solves]
    assert np.all(np.diff(mx) > 0)


def test_sample_prior(tmp_path):
    rep = cmd_sample_prior(cfg(n=(8,), eps=(0.1,), samples=3, draws=4000, out_dir=str(tmp_path)))
    assert abs(rep.empirical - rep.analytic) <= 3 * rep.stderr
    assert (tmp_path / "prior_samples.csv").exists() and (tmp_path / "prior_samples.svg").exists()
    rep2 = cmd_sample_prior(cfg(n=(8,), eps=(0.1,), samples=3, draws=4000))
    np.testing.assert_array_equal(rep.v, rep2.v)


def test_sample_prior_alpha_scaling():
    a1 = cmd_sample_prior(cfg(n=(6,), eps=(0.1,), alpha=1.0, draws=10))
    a3 = cmd_sample_prior(cfg(n=(6,), eps=(0.1,), alpha=3.0, draws=10))
    # the precision scales by N^alpha, so the variance shrinks by N^2 from alpha=1 to alpha=3
    assert a3.analytic == pytest.approx(a1.analytic / 64**2, rel=1e-10)


def test_verify_and_negative_control():
    assert all(r.ok for r in cmd_verify())
    bad = {r.name: r.ok for r in cmd_verify(perturb_mass=0.01)}
    assert bad["mass-matrix"] is False


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["verify"]) == 0
    assert main(["verify", "--perturb-mass", "0.01"]) == 1
    assert main(["diverge", "--alpha", "1"]) == 2
    assert main(["sweep", "--n", "7"]) == 2
    assert main(["reconstruct", "--eps", "-1"]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["reconstruct", "--bogus"])
    assert exc.value.code == 2
    conf = tmp_path / "run.conf"
    conf.write_text("n = 7\neps = 0.02\nseed = 4\n")
    assert main(["reconstruct", "--config", str(conf), "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "run-N128-eps0.02" / "u.csv").exists()
    out = capsys.readouterr().out
    assert "well_count=2" in out
    assert main(["diverge", "--alpha", "0", "--n", "6,7"]) == 0
    assert main(["sample-prior", "--n", "5", "--eps", "0.1", "--draws", "50"]) == 0
