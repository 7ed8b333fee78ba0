import numpy as np
import pytest

from faults import ShiftedGradientGame, corrupt
from payoffnash.errors import ContractViolation
from payoffnash.games import make_canonical_quadratic, make_zero_game
from payoffnash.harness import (
    ExperimentConfig,
    RateTable,
    export_csv,
    fit_rate,
    read_csv,
    run_diagnostics,
    run_experiment,
    streaming_moments,
)
from payoffnash.harness.experiment import resolve_reference
from payoffnash.learner import checkpoint_times, run

T = checkpoint_times(10 ** 5).astype(float)


def config(**kw):
    base = {"game": {"game": "canonical_quadratic"}, "estimator": "two_point",
            "schedule": {"mode": "theorem2"}, "horizon": 2000, "runs": 6, "seed": 3}
    base.update(kw)
    return ExperimentConfig.from_dict(base)


# fit_rate


def test_fit_rate_exact_inverse():
    est = fit_rate(T, values=7 / T)
    assert abs(est.slope + 1) <= 1e-12
    assert est.intercept == pytest.approx(np.log(7))
    assert est.window[1] == 10 ** 5 and est.window[0] >= 10 ** 4
    assert est.n_points >= 3


def test_fit_rate_exact_sqrt():
    assert abs(fit_rate(T, values=3 / np.sqrt(T)).slope + 0.5) <= 1e-12


def test_fit_rate_noisy():
    rng = np.random.default_rng(0)
    for _ in range(200):
        y = 5 / T * (1 + rng.uniform(-0.01, 0.01, size=T.size))
        assert -1.05 <= fit_rate(T, values=y).slope <= -0.95


def test_fit_rate_tail_fraction():
    # Different curves before and after t = 100 pick out the window.
    y = np.where(T < 100, 1 / np.sqrt(T), 10 / T)
    assert fit_rate(T, values=y, tail_fraction=0.6).slope == pytest.approx(-1, abs=1e-12)
    assert fit_rate(T, values=y, tail_fraction=1.0).slope > -1


def test_fit_rate_errors():
    with pytest.raises(ContractViolation, match="non-positive"):
        fit_rate(T, values=np.where(T > 5e4, 0.0, 1 / T))
    with pytest.raises(ContractViolation):
        fit_rate([1.0, 10.0], values=[1.0, 0.1])
    with pytest.raises(ContractViolation):
        fit_rate(T, values=1 / T, tail_fraction=0.0)
    with pytest.raises(ContractViolation):
        fit_rate(RateTable.empty())


# CSV


def test_csv_header_only(tmp_path):
    path = export_csv(RateTable.empty(), tmp_path / "e.csv")
    assert path.read_bytes() == b"t,mean_sq_dist,stderr,sigma,rho,gamma\n"
    assert len(read_csv(path)) == 0


def test_csv_rows_and_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    t = np.arange(1, 65) ** 3
    table = RateTable(t, *(rng.lognormal(size=64) * 10.0 ** rng.integers(-300, 300, 64) for _ in range(5)))
    table.stderr[0] = np.nan
    path = export_csv(table, tmp_path / "r.csv")
    raw = path.read_bytes()
    assert raw.count(b"\n") == 65 and b"\r" not in raw
    back = read_csv(path)
    for name in ("t", "mean_sq_dist", "stderr", "sigma", "rho", "gamma"):
        assert getattr(back, name).tobytes() == np.asarray(getattr(table, name), dtype=getattr(back, name).dtype).tobytes()


def test_csv_io_errors(tmp_path):
    with pytest.raises(OSError, match="missing"):
        export_csv(RateTable.empty(), tmp_path / "missing" / "x.csv")
    with pytest.raises(OSError):
        read_csv(tmp_path / "nope.csv")
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    with pytest.raises(ContractViolation):
        read_csv(bad)


# experiments


def test_config_validation():
    with pytest.raises(ContractViolation):
        config(horizon=1)
    with pytest.raises(ContractViolation):
        config(runs=0)
    with pytest.raises(ContractViolation):
        config(estimator="three_point")
    with pytest.raises(ContractViolation, match="r < s"):
        config(schedule={"mode": "theorem2", "r": 2, "s": 1})
    with pytest.raises(ContractViolation, match="unknown"):
        config(colour="blue")
    with pytest.raises(ContractViolation):
        config(game={"game": "chess"})


def test_schedule_nu_override():
    cfg = config(schedule={"mode": "theorem1", "nu_override": 2.0})
    assert cfg.build_schedule(cfg.build_game()).nu == 2.0


def test_reference_modes():
    g = make_canonical_quadratic()
    point, mode = resolve_reference(g, "auto")
    assert mode == "closed_form"
    solved, mode = resolve_reference(g, "solver")
    assert mode == "solver"
    np.testing.assert_allclose(solved, point, atol=1e-9)


def test_single_run_equals_trajectory():
    cfg = config(runs=1)
    res = run_experiment(cfg)
    game = cfg.build_game()
    traj = run(game, cfg.build_schedule(game), "two_point", 2000, game.closed_form_equilibrium(), 3, 0)
    np.testing.assert_array_equal(res.table.t, traj.t)
    np.testing.assert_array_equal(res.table.mean_sq_dist, traj.sq_dist)
    assert np.all(np.isnan(res.table.stderr))
    np.testing.assert_array_equal(res.table.sigma, traj.sigma)


def test_permutation_invariance():
    cfg = config()
    a = run_experiment(cfg, run_indices=[0, 1, 2, 3, 4, 5])
    b = run_experiment(cfg, run_indices=[4, 2, 0, 5, 1, 3])
    for name in ("mean_sq_dist", "stderr"):
        assert getattr(a.table, name).tobytes() == getattr(b.table, name).tobytes()


def test_worker_invariance(tmp_path):
    cfg = config()
    one = export_csv(run_experiment(cfg, workers=1).table, tmp_path / "1.csv").read_bytes()
    three = export_csv(run_experiment(cfg, workers=3).table, tmp_path / "3.csv").read_bytes()
    assert one == three


def test_streaming_matches_two_pass():
    res = run_experiment(config(runs=20))
    x = res.per_run
    mean = x.sum(axis=0) / len(x)
    se = np.sqrt(((x - mean) ** 2).sum(axis=0) / (len(x) - 1) / len(x))
    np.testing.assert_allclose(res.table.mean_sq_dist, mean, rtol=1e-12, atol=0)
    np.testing.assert_allclose(res.table.stderr, se, rtol=1e-12, atol=0)
    m, s = streaming_moments(x)
    assert m.tobytes() == res.table.mean_sq_dist.tobytes()


def test_metadata_records_reference():
    res = run_experiment(config(reference="solver"))
    assert res.metadata["reference_mode"] == "solver"
    assert res.metadata["runs"] == 6


@pytest.mark.slow
def test_two_point_final_distance():
    res = run_experiment(config(horizon=10 ** 5, runs=50, seed=0))
    assert res.table.mean_sq_dist[-1] < 1e-3


# diagnostics


def test_default_diagnostics_pass():
    results = run_diagnostics({"game": "canonical_quadratic"})
    names = [r.name for r in results]
    assert names == ["gradient_consistency", "strong_monotonicity", "unbiasedness",
                     "variance_scaling", "escape_probability", "projection_bias"]
    assert all(r.passed for r in results), [r.name for r in results if not r.passed]


def test_corrupted_gradient_fails_gradient_probe():
    bad = corrupt(ShiftedGradientGame, make_canonical_quadratic())
    small = {"unbiasedness": {"n_samples": 1000}, "variance": {"n_samples": 1000, "reference_samples": 1000},
             "escape": {"n_samples": 1000}}
    results = {r.name: r for r in run_diagnostics(bad, small)}
    assert not results["gradient_consistency"].passed
    assert results["gradient_consistency"].measured["max_deviation"] == pytest.approx(0.1, abs=1e-6)


def test_zero_game_variance_is_zero():
    zero = make_zero_game(make_canonical_quadratic().action_sets)
    small = {"unbiasedness": {"n_samples": 1000}, "variance": {"n_samples": 1000, "reference_samples": 1000},
             "escape": {"n_samples": 1000}}
    var = {r.name: r for r in run_diagnostics(zero, small)}["variance_scaling"]
    for kind in ("one_point", "two_point"):
        assert np.all(np.array(var.measured[kind]["second_moment"]) == 0)
