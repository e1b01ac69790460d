import csv
import math

import numpy as np
import pytest

from peltseg import ARMDLCost, ChangepointError, InfeasibleError, NormalVarCost, Segmentation, pelt
from peltseg.simeval import (
    CSV_COLUMNS,
    VARIANCE_LOG_SD,
    SimDesign,
    draw_stationary_ar,
    evaluate,
    generate_ar_series,
    generate_variance_series,
    is_stationary,
    loglog_slope,
    match_changepoints,
    run_benchmark,
    sample_changepoints,
)


class TestDesign:
    @pytest.mark.parametrize(
        ("n", "growth", "m"), [(2000, "linear", 20), (1600, "sqrt", 10), (100, "fixed", 2), (1000, "ar", 3)]
    )
    def test_changepoint_counts(self, n, growth, m):
        assert SimDesign(n, growth=growth).n_changepoints == m

    def test_infeasible_design(self):
        with pytest.raises(InfeasibleError):
            generate_variance_series(SimDesign(100, m=10, min_gap=30))


class TestVarianceSeries:
    def test_lognormal_spread(self):
        # log10 of the variance is N(0, 1/2), so about 95.4% fall in [0.1, 10]
        draws = np.exp(np.random.default_rng(0).normal(0.0, VARIANCE_LOG_SD, size=10_000))
        inside = np.mean((draws >= 0.1) & (draws <= 10))
        assert inside == pytest.approx(0.954, abs=0.01)

    def test_generator_variances_spread(self):
        variances = []
        for seed in range(200):
            _, truth, _ = generate_variance_series(SimDesign(5000, m=49, seed=seed))
            variances.extend(truth.info["variances"])
        assert len(variances) == 10_000
        assert np.mean((np.array(variances) >= 0.1) & (np.array(variances) <= 10)) == pytest.approx(0.954, abs=0.01)

    def test_no_changepoints(self):
        series, truth, theta = generate_variance_series(SimDesign(300, m=0))
        assert truth.changepoints == ()
        assert np.unique(theta).size == 1

    def test_gaps_and_range(self):
        for seed in range(1000):
            _, truth, _ = generate_variance_series(SimDesign(2000, m=20, seed=seed))
            cps = np.array(truth.changepoints)
            assert cps.size == 20
            assert cps[0] >= 2 and cps[-1] <= 1998
            assert np.all(np.diff(cps) >= 30)

    def test_theta_follows_segments(self):
        series, truth, theta = generate_variance_series(SimDesign(1000, seed=4))
        for (t, s), v in zip(truth.bounds(), truth.info["variances"]):
            assert np.all(theta[t:s] == v)

    def test_reproducible(self):
        a = generate_variance_series(SimDesign(1000, seed=9))[0]
        b = generate_variance_series(SimDesign(1000, seed=9))[0]
        c = generate_variance_series(SimDesign(1000, seed=10))[0]
        assert np.array_equal(a.values, b.values)
        assert not np.array_equal(a.values, c.values)

    def test_tight_packing_is_forced(self):
        # n = 34, m = 4, gap 10: exactly one admissible configuration
        cps = sample_changepoints(34, 4, 10, np.random.default_rng(0))
        assert cps.tolist() == [2, 12, 22, 32]


class TestARSeries:
    def test_exact_count(self):
        _, truth = generate_ar_series(SimDesign(1000, growth="ar", min_gap=50, law="ar"))
        assert truth.m == 3

    def test_stationary_draws(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            order = int(rng.integers(1, 4))
            coefs = draw_stationary_ar(order, rng)
            companion = np.zeros((order, order))
            companion[0] = coefs
            companion[1:, :-1] = np.eye(order - 1)
            # companion eigenvalues are the reciprocals of the AR roots
            assert np.max(np.abs(np.linalg.eigvals(companion))) < 1 / 1.001

    def test_stationarity_check(self):
        assert is_stationary([0.5])
        assert not is_stationary([1.0])
        assert not is_stationary([0.5, 0.6])

    def test_order_zero_segments_are_white_noise(self):
        pieces = []
        for seed in range(60):
            series, truth = generate_ar_series(SimDesign(1000, growth="ar", min_gap=50, law="ar", seed=seed))
            for (t, s), p, coefs in zip(truth.bounds(), truth.info["orders"], truth.info["coefficients"]):
                if p == 0:
                    assert coefs == []
                    pieces.append(series.values[t:s])
        y = np.concatenate(pieces)
        assert y.size > 5000
        assert y.var() == pytest.approx(1.0, abs=0.05)
        assert abs(np.corrcoef(y[:-1], y[1:])[0, 1]) < 0.05

    def test_reproducible(self):
        d = SimDesign(800, growth="ar", min_gap=50, law="ar", seed=3)
        assert np.array_equal(generate_ar_series(d)[0].values, generate_ar_series(d)[0].values)


class TestEvaluate:
    def setup_method(self):
        self.series, self.truth, self.theta = generate_variance_series(SimDesign(1000, m=5, seed=2))

    def test_perfect_detection(self):
        rep = evaluate(self.series, self.truth, self.truth)
        assert (rep.true_detected, rep.false_detected) == (5, 0)
        # refitted truth against itself gives zero error
        assert rep.mse == 0.0

    def test_mse_against_true_variance(self):
        rep = evaluate(self.series, self.truth, self.truth, self.theta)
        est = np.concatenate([np.full(s - t, np.mean(self.series.values[t:s] ** 2)) for t, s in self.truth.bounds()])
        assert rep.mse == pytest.approx(np.mean((est - self.theta) ** 2), rel=1e-12)

    def test_two_detections_near_one_truth(self):
        tau = self.truth.changepoints[2]
        others = [c for c in self.truth.changepoints if c != tau]
        detected = Segmentation(tuple(sorted([*others, tau - 3, tau + 3])), 1000)
        rep = evaluate(self.series, self.truth, detected)
        assert (rep.true_detected, rep.false_detected) == (5, 1)

    def test_outside_window_is_false(self):
        tau = self.truth.changepoints[0]
        detected = Segmentation((tau + 11,), 1000)
        rep = evaluate(self.series, self.truth, detected)
        assert (rep.true_detected, rep.false_detected) == (0, 1)

    def test_matching_order_invariant(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            true = sorted(rng.choice(np.arange(1, 300), size=8, replace=False).tolist())
            det = sorted(rng.choice(np.arange(1, 300), size=12, replace=False).tolist())
            a = match_changepoints(true, det)
            assert a == match_changepoints(true[::-1], det[::-1])
            # matching is one-to-one, hence symmetric in its two arguments
            assert a == match_changepoints(det, true)
            assert a <= min(len(true), len(det))

    def test_nearest_first(self):
        assert match_changepoints([100, 108], [104, 109]) == 2
        assert match_changepoints([100], [95, 105]) == 1

    def test_length_mismatch(self):
        with pytest.raises(ChangepointError):
            evaluate(self.series, self.truth, Segmentation((), 999))


def test_loglog_slope_recovers_power():
    ns = [1000, 2000, 5000, 10000]
    assert loglog_slope(ns, [3e-9 * n**2 for n in ns]) == pytest.approx(2.0, rel=1e-9)


class TestBenchmark:
    def test_single_row(self):
        res = run_benchmark([SimDesign(500, seed=0)], algorithms=["pelt"], reps=1)
        assert len(res.rows) == 1 and len(res.summary) == 1
        assert res.errors == []

    def test_aggregates_are_means(self):
        res = run_benchmark([SimDesign(1000)], algorithms=["pelt", "bs", "subbs"], reps=4, seed=3)
        for entry in res.summary:
            rows = [r for r in res.rows if r["algorithm"] == entry["algorithm"]]
            for key in ("cost", "mse", "true_det", "false_det", "runtime_s"):
                assert entry[key] == pytest.approx(sum(r[key] for r in rows) / 4, rel=1e-12)
            assert entry["cost_gap"] >= -1e-9

    def test_subbs_matches_pelt_count(self):
        res = run_benchmark([SimDesign(1000)], algorithms=["pelt", "subbs"], reps=3)
        by = {(r["rep"], r["algorithm"]): r for r in res.rows}
        for rep in range(3):
            assert by[rep, "subbs"]["detected"] == by[rep, "pelt"]["detected"]

    def test_pelt_equals_op(self):
        res = run_benchmark([SimDesign(2000)], algorithms=["pelt", "op"], reps=2)
        by = {(r["rep"], r["algorithm"]): r["cost"] for r in res.rows}
        for rep in range(2):
            assert by[rep, "op"] == pytest.approx(by[rep, "pelt"], rel=1e-12, abs=1e-9)

    def test_errors_are_recorded(self):
        def broken(n, model):
            raise RuntimeError("boom")

        res = run_benchmark([SimDesign(300)], algorithms=["pelt"], penalty=broken, reps=2)
        assert res.rows == []
        assert len(res.errors) == 2 and "boom" in res.errors[0]["error"]

    def test_ar_scenario(self):
        d = SimDesign(600, growth="ar", min_gap=50, law="ar")
        res = run_benchmark([d], algorithms=["pelt"], model=ARMDLCost(3), reps=1)
        assert res.errors == []
        assert math.isnan(res.rows[0]["mse"])

    def test_csv(self, tmp_path):
        res = run_benchmark([SimDesign(500)], algorithms=["pelt", "bs"], reps=2)
        path = tmp_path / "bench.csv"
        res.write_csv(path)
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert list(rows[0]) == CSV_COLUMNS
        assert len(rows) == 4
        assert float(rows[0]["cost"]) == res.rows[0]["cost"]

    def test_unknown_algorithm(self):
        with pytest.raises(ChangepointError):
            run_benchmark([SimDesign(500)], algorithms=["pelt", "magic"])


def test_default_model_is_zero_mean_variance():
    series, truth, _ = generate_variance_series(SimDesign(1000, seed=1))
    res = run_benchmark([SimDesign(1000)], algorithms=["pelt"], reps=1, seed=1)
    direct = pelt(series, NormalVarCost(mu=0.0), math.log(1000))
    assert res.rows[0]["cost"] == direct.total_cost
