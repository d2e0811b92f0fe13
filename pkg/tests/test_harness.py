import csv
import json

import numpy as np
import numpy.testing as npt
import pytest

from spsolve import cli
from spsolve.core import residual_vector
from spsolve.harness import experiment
from spsolve.harness.experiment import CSV_HEADER, ConfigError, ExperimentConfig, run_experiment
from spsolve.harness.generators import (
    gen_circle_problem,
    gen_graph_realization,
    gen_linear_system,
    gen_phase_retrieval,
)
from spsolve.harness.metrics import nmse, nmse_phase_aligned, nmse_rigid_aligned
from spsolve.harness.svg import line_plot_svg
from spsolve.solver import DivergenceError, SolverConfig, Status, initial_point, sp_solve


@pytest.mark.parametrize(
    "make",
    [
        lambda s: gen_circle_problem(6, 24, s),
        lambda s: gen_phase_retrieval(5, 25, s),
        lambda s: gen_linear_system(6, 10, s),
        lambda s: gen_graph_realization(6, 2, 10, s),
    ],
)
def test_generators_deterministic_and_solved(make):
    a, b = make(7), make(7)
    npt.assert_array_equal(a.known_solution, b.known_solution)
    assert a.m == b.m
    r = residual_vector(a, a.known_solution)
    assert np.max(np.abs(r)) <= 1e-10
    assert not np.array_equal(make(8).known_solution, a.known_solution)


def test_circle_generator_exact_residuals():
    prob = gen_circle_problem(100, 400, 0)
    assert prob.dim == 100 and prob.m == 400
    assert np.max(np.abs(residual_vector(prob, prob.known_solution))) <= 1e-12 * 400


def test_phase_generator_phase_invariance():
    prob = gen_phase_retrieval(8, 40, 1)
    assert prob.is_complex
    for phi in (0.3, 2.0, 5.5):
        r = residual_vector(prob, np.exp(1j * phi) * prob.known_solution)
        assert np.max(np.abs(r)) <= 1e-10


def test_graph_generator_rigid_invariance(rng):
    prob = gen_graph_realization(7, 3, 12, 2)
    X = prob.known_solution.reshape(-1, 3)
    Q = np.linalg.qr(rng.standard_normal((3, 3)))[0]
    moved = (X @ Q.T + rng.standard_normal(3)).ravel()
    assert np.max(np.abs(residual_vector(prob, moved))) <= 1e-10


def test_graph_generator_errors():
    with pytest.raises(ValueError):
        gen_graph_realization(4, 2, 7, 0)
    with pytest.raises(ValueError):
        gen_graph_realization(4, 2, 2, 0)


def test_nmse_examples():
    xs = np.array([1.0, -2.0, 2.0])
    assert nmse(xs, xs) == 0
    assert nmse(np.zeros(3), xs) == 1
    assert nmse(2 * xs, xs) == 1
    with pytest.raises(ValueError):
        nmse(xs, np.zeros(3))


def test_nmse_phase_aligned(rng):
    xs = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    assert nmse_phase_aligned(np.exp(1.3j) * xs, xs) == pytest.approx(0, abs=1e-28)
    assert nmse_phase_aligned(np.zeros(5), xs) == 1
    x = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    phi = np.linspace(0, 2 * np.pi, 10_000, endpoint=False)
    grid = np.min(np.sum(np.abs(x[None, :] - np.exp(1j * phi)[:, None] * xs[None, :]) ** 2, axis=1)) / np.vdot(xs, xs).real
    assert nmse_phase_aligned(x, xs) == pytest.approx(grid, abs=1e-6)
    assert nmse_phase_aligned(x, xs) <= grid + 1e-12
    closed = (np.vdot(x, x).real + np.vdot(xs, xs).real - 2 * abs(np.vdot(xs, x))) / np.vdot(xs, xs).real
    assert nmse_phase_aligned(x, xs) == pytest.approx(closed, abs=1e-12)


def test_nmse_phase_grid_oracle_resolution(rng):
    # with the optimal phase on the grid the oracle agrees to 1e-8
    xs = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    phi0 = 2 * np.pi * 1234 / 10_000
    x = np.exp(1j * phi0) * xs + 0.1 * (rng.standard_normal(5) + 1j * rng.standard_normal(5))
    w = np.vdot(xs, x)
    x = x * np.exp(1j * (phi0 - np.angle(w)))
    phi = np.linspace(0, 2 * np.pi, 10_000, endpoint=False)
    grid = np.min(np.sum(np.abs(x[None, :] - np.exp(1j * phi)[:, None] * xs[None, :]) ** 2, axis=1)) / np.vdot(xs, xs).real
    assert abs(nmse_phase_aligned(x, xs) - grid) <= 1e-8


def test_nmse_rigid_aligned(rng):
    X = rng.standard_normal((6, 2))
    th = 0.8
    R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    moved = X @ R.T + np.array([3.0, -1.0])
    assert nmse_rigid_aligned(moved.ravel(), X.ravel(), 2) == pytest.approx(0, abs=1e-24)
    assert nmse_rigid_aligned(X.ravel() + 0.1, X.ravel(), 2) == pytest.approx(0, abs=1e-24)


def test_small_graph_realization_converges():
    prob = gen_graph_realization(4, 2, 6, 5)
    rng = np.random.default_rng(0)
    x0 = initial_point(prob, rng, 0.01 * np.linalg.norm(prob.known_solution))
    x, _, status = sp_solve(prob, x0, SolverConfig(rule="cp", tol=1e-10, max_iterations=100_000))
    assert status is Status.CONVERGED
    assert np.max(np.abs(residual_vector(prob, x))) < 1e-10


def test_config_validation(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig(problem="nope", out=tmp_path)
    with pytest.raises(ConfigError):
        ExperimentConfig(n=10, m=5, out=tmp_path)
    with pytest.raises(ConfigError):
        ExperimentConfig(variants=["rp"], trials=5, out=tmp_path)
    with pytest.raises(ConfigError):
        ExperimentConfig(variants=["zz"], out=tmp_path)
    with pytest.raises(ConfigError):
        ExperimentConfig(problem="grp", out=tmp_path)
    ok = ExperimentConfig(problem="graph_realization", n_v=4, d=2, edges=5, variants=["cp"], out=tmp_path)
    assert ok.problem == "grp"


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def test_experiment_outputs(tmp_path):
    cfg = ExperimentConfig(n=6, m=24, variants=["cp", "gp", "mp"], trials=2, seed=3, max_cycles=300, out=tmp_path)
    res = run_experiment(cfg)
    for v in ("cp", "gp", "mp"):
        rows = _read_csv(tmp_path / f"{v}.csv")
        assert tuple(rows[0]) == CSV_HEADER
        cycles = [int(r[0]) for r in rows[1:]]
        assert cycles == list(range(len(cycles)))
        nm = np.array([float(r[1]) for r in rows[1:]])
        assert nm[-1] < 1e-12
        assert all(float(r[2]) <= float(r[1]) <= float(r[3]) for r in rows[1:])
        assert len(rows) == max(len(t.cycle_nmse) for t in res.runs[v]) + 1
    raw = (tmp_path / "cp.csv").read_bytes()
    assert b"\r" not in raw
    report = json.loads((tmp_path / "report.json").read_text())
    for key in ("kappa_U", "kappa_G", "sigma_min_U", "hoffman_U", "hoffman_G", "l2inf_G", "rates", "empirical"):
        assert key in report
    assert report["diverged"] == {"cp": 0, "gp": 0, "mp": 0}
    assert report["notes"]
    svg = (tmp_path / "nmse.svg").read_text()
    assert svg.startswith("<svg") and svg.count("<polyline") == 3


def test_empirical_mp_rate_reported(tmp_path):
    cfg = ExperimentConfig(n=5, m=20, variants=["mp"], trials=1, seed=1, max_cycles=3000, init_radius=0.01, out=tmp_path)
    res = run_experiment(cfg)
    assert res.report["empirical_units"]["mp"] == "step"
    assert 0 < res.report["empirical"]["mp"] < 1


def test_divergent_trials_are_counted(tmp_path, monkeypatch):
    calls = {"n": 0}
    real = experiment.sp_solve

    def flaky(problem, x0, config, callback=None):
        calls["n"] += 1
        if calls["n"] == 1:
            raise DivergenceError("boom", None)
        return real(problem, x0, config, callback)

    monkeypatch.setattr(experiment, "sp_solve", flaky)
    cfg = ExperimentConfig(n=4, m=12, variants=["cp"], trials=3, out=tmp_path)
    res = run_experiment(cfg)
    assert res.report["diverged"] == {"cp": 1}
    assert len(res.runs["cp"]) == 2


def test_svg_is_deterministic():
    a = line_plot_svg({"cp": [0.0, -1.0, -2.5]}, title="t")
    assert a == line_plot_svg({"cp": [0.0, -1.0, -2.5]}, title="t")
    assert "cp" in a


def test_cli_run_and_determinism(tmp_path, capsys):
    args = ["run", "--problem", "circles", "--n", "8", "--m", "32", "--variants", "cp,rpp,gp",
            "--trials", "2", "--seed", "4", "--max-cycles", "200"]
    assert cli.main(args + ["--out", str(tmp_path / "a")]) == 0
    assert cli.main(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ("cp.csv", "rpp.csv", "gp.csv", "report.json", "nmse.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert "O(m^2 n)" in capsys.readouterr().out


def test_cli_analyze(tmp_path):
    assert cli.main(["analyze", "--problem", "phase", "--n", "4", "--m", "20", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["kernel_dim"] == 1
    assert list(tmp_path.iterdir()) == [tmp_path / "report.json"]


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "--problem", "circles", "--n", "10", "--m", "5"],
        ["run", "--problem", "circles", "--variants", "rp", "--trials", "3"],
        ["run", "--problem", "grp"],
        ["run", "--problem", "circles", "--variants", "cp,xx"],
        ["run", "--problem", "bogus"],
        ["run", "--problem", "circles", "--n", "ten"],
    ],
)
def test_cli_invalid_config_exit_2(argv, tmp_path):
    try:
        code = cli.main(argv + ["--out", str(tmp_path)])
    except SystemExit as exc:
        code = exc.code
    assert code == 2


def test_cli_all_diverged_exit_3(tmp_path, monkeypatch):
    def always(problem, x0, config, callback=None):
        raise DivergenceError("boom", None)

    monkeypatch.setattr(experiment, "sp_solve", always)
    code = cli.main(["run", "--problem", "linear", "--n", "3", "--m", "6", "--variants", "cp", "--trials", "2",
                     "--out", str(tmp_path)])
    assert code == 3
    assert (tmp_path / "report.json").exists()
