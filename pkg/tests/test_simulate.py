import functools
import itertools
import math

import numpy as np
import pytest

from medtest import simulate
from medtest.configuration import InvalidConfiguration, ScenarioConfig, SimulationPlan
from medtest.errors import (
    CalibrationError,
    DomainError,
    FitFailureWarning,
    NumericalError,
    PValueRangeError,
    SeparationError,
)
from medtest.simulate import (
    MetricEstimate,
    calibrate_censoring,
    ensure_calibrated,
    generate,
    histogram_data,
    ks_uniform,
    qq_data,
    run_coverage,
    run_fwer,
    run_plan,
    run_size_power,
    summary_rows,
)
from medtest.utils.constants import Metric, StudyKind, TestMethod


def _scenario(**conf):
    return ScenarioConfig.from_dict({"n": 200, "reps": 20, "base_seed": 5, **conf})


class TestGenerate:
    @pytest.fixture(autouse=True)
    def _init_scenario(self):
        self.scenario = _scenario(family="linear", alpha=[0.3, 0.0], beta=[0.2, 0.1])

    def test_replication_is_a_pure_function_of_its_index(self):
        first = generate(self.scenario, 3)
        again = generate(self.scenario, 3)
        other = generate(self.scenario, 4)
        np.testing.assert_array_equal(first.exposure, again.exposure)
        np.testing.assert_array_equal(first.outcome, again.outcome)
        assert not np.array_equal(first.exposure, other.exposure)

    def test_seed_changes_the_data(self):
        reseeded = self.scenario.with_overrides(base_seed=6)
        assert not np.array_equal(
            generate(self.scenario, 0).mediators, generate(reseeded, 0).mediators
        )

    def test_linear_shapes(self):
        data = generate(self.scenario, 0)
        assert data.n == 200
        assert data.d == 2
        assert data.outcome is not None
        assert not data.is_survival

    def test_logistic_outcome_is_binary(self):
        data = generate(self.scenario.with_overrides(family="logistic"), 0)
        assert set(np.unique(data.outcome)) <= {0.0, 1.0}
        assert 0.2 < data.outcome.mean() < 0.8

    def test_cox_needs_calibration(self):
        with pytest.raises(InvalidConfiguration, match="has not been calibrated"):
            generate(self.scenario.with_overrides(family="cox"), 0)

    def test_cox_censoring_reaches_its_target(self):
        scenario = ensure_calibrated(self.scenario.with_overrides(family="cox", n=4000))
        data = generate(scenario, 0)
        assert data.is_survival
        assert np.all(data.time > 0.0)
        assert 1.0 - data.event.mean() == pytest.approx(0.30, abs=0.03)


class TestCalibration:
    def test_null_predictor(self):
        """With η ≡ 0, (1 - exp(-c₀)) / c₀ = 0.3 has its root near c₀ = 3.197."""
        scenario = _scenario(family="cox", alpha=[0.0], beta=[0.0], gamma=0.0)
        c0 = calibrate_censoring(scenario)
        assert c0 == pytest.approx(3.197, rel=0.02)
        assert calibrate_censoring(scenario) == c0

    def test_only_cox_scenarios(self):
        with pytest.raises(InvalidConfiguration, match="needs the cox family"):
            calibrate_censoring(_scenario(family="linear", alpha=[0.1], beta=[0.1]))

    def test_pilot_size(self):
        scenario = _scenario(family="cox", alpha=[0.1], beta=[0.1])
        with pytest.raises(DomainError, match="pilot_n must be at least"):
            calibrate_censoring(scenario, pilot_n=1000)

    def test_unreachable_target(self):
        scenario = _scenario(
            family="cox", alpha=[0.0], beta=[0.0], gamma=0.0, censor_target=0.9999
        )
        with pytest.raises(CalibrationError, match="Censoring calibration failed"):
            calibrate_censoring(scenario)

    def test_ensure_calibrated(self):
        linear = _scenario(family="linear", alpha=[0.1], beta=[0.1])
        assert ensure_calibrated(linear) is linear
        fixed = _scenario(family="cox", alpha=[0.1], beta=[0.1], censor_c0=2.0)
        assert ensure_calibrated(fixed) is fixed
        calibrated = ensure_calibrated(fixed.with_overrides(censor_c0=None))
        assert calibrated.censor_c0 is not None
        assert calibrated.censor_c0 > 0.0


class TestSizePower:
    def test_size_under_the_null(self):
        scenario = _scenario(family="linear", alpha=[0.0], beta=[0.0], reps=40)
        summary = run_size_power(scenario)
        assert summary.study == StudyKind.SIZE_POWER
        assert summary.reps_used == 40
        assert summary.failures == 0
        assert not summary.flagged
        assert {e.method for e in summary.estimates} == set(TestMethod.list())
        assert all(e.metric == Metric.SIZE for e in summary.estimates)
        assert set(summary.diagnostics) == {
            "lambda_n",
            "mu_alpha",
            "mu_beta",
            "prob_tmax_ge",
            "theoretical_power_js",
            "theoretical_power_ajs",
        }
        with pytest.raises(KeyError):
            summary.estimate(Metric.POWER, TestMethod.AJS)

    def test_power_for_strong_effects(self):
        summary = run_size_power(_scenario(family="linear", alpha=[0.5], beta=[0.5]))
        for method in TestMethod:
            estimate = summary.estimate(Metric.POWER, method)
            assert estimate.value == 1.0
            assert estimate.standard_error == 0.0
        assert summary.diagnostics["prob_tmax_ge"] == 1.0

    def test_statistics_are_kept_on_request(self):
        summary = run_size_power(
            _scenario(family="linear", alpha=[0.0], beta=[0.2]), keep_statistics=True
        )
        assert set(summary.statistics) == {
            "t_max",
            "p_sobel",
            "p_js",
            "p_asobel",
            "p_ajs",
        }
        assert all(len(series) == 20 for series in summary.statistics.values())
        assert all(
            ajs <= js
            for ajs, js in zip(summary.statistics["p_ajs"], summary.statistics["p_js"])
        )

    def test_thread_count_does_not_change_results(self):
        scenario = _scenario(family="logistic", alpha=[0.2], beta=[0.3])
        serial = run_size_power(scenario, workers=1)
        threaded = run_size_power(scenario, workers=3)
        assert serial.estimates == threaded.estimates
        assert serial.diagnostics == threaded.diagnostics

    def test_cox_reports_censoring(self):
        scenario = _scenario(
            family="cox", alpha=[0.0], beta=[0.0], censor_c0=3.0, reps=5
        )
        summary = run_size_power(scenario)
        assert 0.0 < summary.diagnostics["censoring_rate"] < 1.0

    def test_single_mediator_only(self):
        with pytest.raises(InvalidConfiguration, match="one mediator"):
            run_size_power(
                _scenario(family="linear", alpha=[0.1, 0.1], beta=[0.1, 0.1])
            )

    @pytest.mark.parametrize("workers", [0, -1, 1.5])
    def test_workers_must_be_positive(self, workers):
        with pytest.raises(DomainError, match="workers must be a positive integer"):
            run_size_power(_scenario(family="linear", alpha=[0.1], beta=[0.1]), workers)


class TestFailures:
    @pytest.fixture(autouse=True)
    def _init_scenario(self):
        self.scenario = _scenario(family="linear", alpha=[0.1], beta=[0.1], reps=40)

    def test_failed_replications_are_dropped_and_flagged(self, monkeypatch):
        calls = itertools.count()
        fit_mediation = simulate.fit_mediation

        def flaky(data, family, settings=None):
            if next(calls) % 2:
                raise SeparationError("response is constant")
            return fit_mediation(data, family, settings)

        monkeypatch.setattr(simulate, "fit_mediation", flaky)
        with pytest.warns(FitFailureWarning, match="20 of 40 replications"):
            summary = run_size_power(self.scenario)
        assert summary.reps_used == 20
        assert summary.failures == 20
        assert summary.flagged

    def test_all_replications_failing(self, monkeypatch):
        def broken(data, family, settings=None):
            raise SeparationError("response is constant")

        monkeypatch.setattr(simulate, "fit_mediation", broken)
        with pytest.raises(NumericalError, match="All 40 replications"):
            run_size_power(self.scenario)

    def test_out_of_domain_draw_counts_as_a_failure(self, monkeypatch):
        generate_data = simulate.generate

        def overflowing(scenario, rep):
            if rep == 7:
                raise DomainError("exp(eta) overflows")
            return generate_data(scenario, rep)

        monkeypatch.setattr(simulate, "generate", overflowing)
        with pytest.warns(FitFailureWarning, match="1 of 40 replications"):
            summary = run_size_power(self.scenario)
        assert summary.failures == 1
        assert summary.reps_used == 39


class TestFwer:
    def test_rates(self):
        scenario = _scenario(
            family="linear", alpha=[0.5, 0.0, 0.5], beta=[0.5, 0.5, 0.0], truth=[1]
        )
        summary = run_fwer(scenario)
        assert summary.study == StudyKind.FWER
        for method in TestMethod:
            assert 0.0 <= summary.estimate(Metric.FWER, method).value <= 1.0
            assert summary.estimate(Metric.POWER, method).value == 1.0
        assert summary.diagnostics["threshold"] == pytest.approx(0.05 / 3)
        assert summary.diagnostics["true_mediators"] == 1.0

    def test_null_family_has_no_power(self):
        scenario = _scenario(family="linear", alpha=[0.0, 0.0], beta=[0.0, 0.0])
        summary = run_fwer(scenario)
        assert all(e.metric == Metric.FWER for e in summary.estimates)

    def test_several_mediators_only(self):
        with pytest.raises(InvalidConfiguration, match="at least two mediators"):
            run_fwer(_scenario(family="linear", alpha=[0.1], beta=[0.1]))


class TestCoverage:
    def test_estimates_per_mediator(self):
        scenario = _scenario(
            family="linear", alpha=[0.3, 0.0], beta=[0.3, 0.0], reps=30
        )
        summary = run_coverage(scenario)
        assert summary.study == StudyKind.COVERAGE
        for k in (1, 2):
            for method in ("Sobel", "ASobel"):
                cp = summary.estimate(Metric.CP, method, mediator_index=k)
                assert 0.0 <= cp.value <= 1.0
            sobel = summary.estimate(Metric.LCI, "Sobel", mediator_index=k)
            asobel = summary.estimate(Metric.LCI, "ASobel", mediator_index=k)
            assert 0.0 < asobel.value <= sobel.value

    def test_interval_lengths_shrink_with_n(self):
        small = run_coverage(_scenario(family="linear", alpha=[0.3], beta=[0.3], n=200))
        large = run_coverage(_scenario(family="linear", alpha=[0.3], beta=[0.3], n=800))
        lci = [
            summary.estimate(Metric.LCI, "Sobel", mediator_index=1).value
            for summary in (small, large)
        ]
        assert lci[1] < lci[0]


class TestTables:
    def test_plan_rows(self):
        plan = SimulationPlan.from_dict(
            {
                "name": "small",
                "study": "size_power",
                "family": "linear",
                "reps": 10,
                "scenarios": [
                    {"n": 200, "alpha": [0.0], "beta": [0.0]},
                    {"n": 200, "alpha": [0.5], "beta": [0.0], "label": "H10"},
                ],
            }
        )
        summaries = run_plan(plan)
        table = summary_rows(summaries)
        assert list(table["scenario"]) == ["linear n=200 (0, 0)", "H10"]
        assert list(table["metric"]) == ["size", "size"]
        assert list(table["alpha"]) == [0.0, 0.5]
        methods = {"Sobel", "Sobel_se", "JS", "ASobel", "AJS", "AJS_se"}
        assert methods <= set(table.columns)
        assert "elapsed" not in table.columns

    def test_coverage_rows(self):
        summary = run_coverage(
            _scenario(family="linear", alpha=[0.3, 0.0], beta=[0.3, 0.0], reps=10)
        )
        table = summary_rows([summary])
        assert len(table) == 4
        assert list(table["mediator"]) == [1, 1, 2, 2]
        assert list(table["metric"]) == ["cp", "lci", "cp", "lci"]

    def test_metric_estimates_are_bounded(self):
        with pytest.raises(ValueError, match="must lie in"):
            MetricEstimate(
                metric=Metric.SIZE, method="AJS", value=1.5, standard_error=0.0
            )
        length = MetricEstimate(
            metric=Metric.LCI, method="Sobel", value=1.5, standard_error=0.1
        )
        assert length.value == 1.5


class TestPValueExports:
    def test_qq_pairs(self):
        pairs = qq_data([0.3, 0.1, 0.2])
        assert [u for u, _ in pairs] == pytest.approx([1 / 6, 0.5, 5 / 6])
        assert [p for _, p in pairs] == [0.1, 0.2, 0.3]

    @pytest.mark.parametrize("bad", [1.5, -0.01, math.nan])
    def test_out_of_range_rows_are_named(self, bad):
        with pytest.raises(PValueRangeError, match="at row 2"):
            qq_data([0.5, bad, 0.2])

    def test_empty_input(self):
        with pytest.raises(DomainError, match="At least one p-value"):
            qq_data([])

    def test_histogram(self):
        edges, counts = histogram_data([0.01, 0.02, 0.51, 1.0], bins=2)
        np.testing.assert_allclose(edges, [0.0, 0.5, 1.0])
        assert list(counts) == [2, 2]

    def test_ks_distance_of_plotting_positions(self):
        positions = (np.arange(1, 11) - 0.5) / 10
        assert ks_uniform(positions) == pytest.approx(0.05)




def _single_mediator(**conf):
    """The single-mediator design: M = αX + e, γ = 0.5, n = 500."""
    defaults = {
        "family": "linear",
        "n": 500,
        "mediator_intercept": 0.0,
        "base_seed": 20240611,
    }
    return ScenarioConfig.from_dict({**defaults, **conf})


@pytest.mark.slow
class TestMonteCarloReproductions:
    """Long runs checked against published rates and their tolerances."""

    def test_linear_double_null_sizes(self):
        scenario = _single_mediator(alpha=[0.0], beta=[0.0], reps=10_000)
        summary = run_size_power(scenario, workers=4)
        size = functools.partial(summary.estimate, Metric.SIZE)
        assert size(TestMethod.AJS).value == pytest.approx(0.0487, abs=0.010)
        assert size(TestMethod.ASOBEL).value == pytest.approx(0.0484, abs=0.010)
        assert size(TestMethod.JS).value == pytest.approx(0.0025, abs=0.003)
        assert size(TestMethod.SOBEL).value <= 0.001

    def test_linear_power_at_small_effects(self):
        scenario = _single_mediator(alpha=[0.1], beta=[0.15], reps=10_000)
        summary = run_size_power(scenario, workers=4)
        power = functools.partial(summary.estimate, Metric.POWER)
        assert power(TestMethod.AJS).value == pytest.approx(0.7246, abs=0.02)
        assert power(TestMethod.JS).value == pytest.approx(0.5531, abs=0.02)
        assert power(TestMethod.ASOBEL).value == pytest.approx(0.6984, abs=0.02)

    def test_theoretical_power_matches_at_n_1500(self):
        scenario = _single_mediator(n=1500, alpha=[0.1], beta=[0.15], reps=5000)
        summary = run_size_power(scenario, workers=4)
        ajs = summary.estimate(Metric.POWER, TestMethod.AJS).value
        assert ajs == pytest.approx(0.9777, abs=0.02)
        assert summary.diagnostics["theoretical_power_ajs"] == pytest.approx(
            ajs, abs=0.02
        )

    def test_logistic_power(self):
        """
        Intercept-free logistic outcome with γ = 0.5. The adaptive test gains
        on JS, landing near 0.63 for this design.
        """
        scenario = _single_mediator(
            family="logistic", alpha=[0.2], beta=[0.2], reps=5000
        )
        summary = run_size_power(scenario, workers=4)
        power = functools.partial(summary.estimate, Metric.POWER)
        assert power(TestMethod.AJS).value == pytest.approx(0.63, abs=0.03)
        assert power(TestMethod.AJS).value > power(TestMethod.JS).value

    def test_cox_power(self):
        scenario = _single_mediator(
            family="cox", alpha=[0.15], beta=[0.15], reps=5000
        )
        summary = run_size_power(scenario, workers=4)
        ajs = summary.estimate(Metric.POWER, TestMethod.AJS).value
        assert ajs == pytest.approx(0.858, abs=0.02)
        assert summary.diagnostics["censoring_rate"] == pytest.approx(0.30, abs=0.01)

    def test_linear_fwer_with_ten_mediators(self):
        scenario = ScenarioConfig.from_dict(
            {
                "family": "linear",
                "n": 500,
                "alpha": [0.15, 0.05, 0.15, 0.15, 0.05, 0.5, 0.5, 0, 0, 0],
                "beta": [0.15, 0.05, 0.15, 0.05, 0.1, 0, 0, 0.5, 0.5, 0],
                "truth": [1, 2, 3, 4, 5],
                "reps": 5000,
                "base_seed": 20240611,
            }
        )
        summary = run_fwer(scenario, workers=4)
        fwer = summary.estimate(Metric.FWER, TestMethod.AJS)
        assert fwer.value == pytest.approx(0.0262, abs=0.012)
        assert fwer.value <= 0.05 + 3 * fwer.standard_error
        power = summary.estimate(Metric.POWER, TestMethod.AJS).value
        assert power == pytest.approx(0.3332, abs=0.03)

    def test_coverage_under_double_null(self):
        scenario = ScenarioConfig.from_dict(
            {
                "family": "linear",
                "n": 500,
                "alpha": [0, 0.35, 0.5, 0, 0, 0.15, 0.25],
                "beta": [0, 0, 0, 0.35, 0.5, 0.3, 0.35],
                "reps": 5000,
                "base_seed": 20240611,
            }
        )
        summary = run_coverage(scenario, workers=4)
        cp = functools.partial(summary.estimate, Metric.CP, mediator_index=1)
        lci = functools.partial(summary.estimate, Metric.LCI, mediator_index=1)
        assert cp("ASobel").value == pytest.approx(0.9482, abs=0.010)
        assert cp("Sobel").value >= 0.998
        ratio = lci("ASobel").value / lci("Sobel").value
        assert ratio == pytest.approx(0.50, abs=0.01)

    def test_adaptive_p_values_are_uniform_under_double_null(self):
        scenario = _single_mediator(n=2000, alpha=[0.0], beta=[0.0], reps=5000)
        summary = run_size_power(scenario, workers=4, keep_statistics=True)
        assert ks_uniform(summary.statistics["p_ajs"]) < 0.03
        assert ks_uniform(summary.statistics["p_js"]) > 0.10
