#!/usr/bin/env python3
"""
Test script for the Bayesian switchpoint module.

MCMC tests use reduced chain lengths; they still take a few seconds each.

Usage:
    python test_switchpoint.py
"""

import os
import sys
import math
import logging
from datetime import date, datetime, timedelta, timezone

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import poisson

# Configure logging
logging.basicConfig(level=logging.INFO,
                    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

# Add the parent directory to the system path to import the activity_shift package
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from activity_shift.exceptions import (
    ConvergenceError, DegenerateInputError, ValidationError, WindowTooShortError,
)
from activity_shift.modules import hmc
from activity_shift.modules.switchpoint import (
    PriorConfig, SwitchpointPosterior, aggregate_switch_jumps, exact_posterior, mcmc_posterior,
    posterior_predictive_pvalue, switch_jump,
)
from activity_shift.modules.synthetic import generate, validation_scenarios
from activity_shift.modules.timeline import AnalysisWindow, DailySeries, Event, Timeline, bin_daily
from test_modules.harness import collect, run_module_tests

START = date(2020, 1, 1)


def series_of(counts) -> DailySeries:
    counts = np.asarray(counts)
    return DailySeries(AnalysisWindow(START, START + timedelta(days=len(counts))), counts)


def step_series(seed, before, after, n_before, n_after) -> DailySeries:
    rng = np.random.default_rng(seed)
    return series_of(np.concatenate([rng.poisson(before, n_before), rng.poisson(after, n_after)]))


def side_evidence(counts, alpha):
    """Marginal likelihood of one side, integrating the rate numerically."""
    def integrand(lam):
        return float(np.prod(poisson.pmf(counts, lam))) * alpha * math.exp(-alpha * lam)
    return quad(integrand, 0, np.inf, limit=200)[0]


def total_variation(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def test_exact_posterior_symmetric_three_days():
    posterior = exact_posterior(series_of([0, 9, 0]), PriorConfig(0.5))
    assert posterior.tau_pmf == pytest.approx([0.5, 0.5], abs=1e-12)
    assert posterior.solver == "exact"


def test_exact_posterior_matches_numerical_integration():
    counts = np.array([0, 9, 2, 1])
    alpha = 0.4
    posterior = exact_posterior(series_of(counts), PriorConfig(alpha))
    weights = np.array([side_evidence(counts[:t], alpha) * side_evidence(counts[t:], alpha)
                        for t in range(1, counts.size)])
    assert posterior.tau_pmf == pytest.approx(weights / weights.sum(), abs=1e-6)


def test_posterior_invariants():
    posterior = exact_posterior(step_series(1, 2.0, 6.0, 40, 40))
    assert posterior.tau_pmf.shape == (79,)
    assert abs(posterior.tau_pmf.sum() - 1.0) <= 1e-9
    assert np.all(posterior.tau_pmf >= 0)
    assert 1 <= posterior.map_index <= 79
    assert not posterior.tau_pmf.flags.writeable


def test_posterior_validation():
    window = AnalysisWindow(START, START + timedelta(days=3))
    with pytest.raises(ValidationError):
        SwitchpointPosterior(window, np.array([0.5, 0.4]), 1.0, 1.0, 1.0)
    with pytest.raises(ValidationError):
        SwitchpointPosterior(window, np.array([1.0]), 1.0, 1.0, 1.0)
    with pytest.raises(ValidationError):
        PriorConfig(0.0)
    with pytest.raises(WindowTooShortError):
        exact_posterior(series_of([1, 2]))


def test_default_prior_matches_mean():
    assert PriorConfig.from_series(series_of([2, 4, 6])).alpha == pytest.approx(1.0 / 4.001)


def test_switch_recovery():
    hits = 0
    for seed in range(100):
        posterior = exact_posterior(step_series(seed, 1.0, 5.0, 200, 200))
        hits += abs(posterior.map_index - 200) <= 2
    assert hits >= 95
    posterior = exact_posterior(step_series(3, 1.0, 5.0, 200, 200))
    assert posterior.lambda1_mode == pytest.approx(1.0, abs=0.25)
    assert posterior.lambda2_mode == pytest.approx(5.0, abs=0.5)


def test_constant_rate_modes():
    series = series_of(np.random.default_rng(17).poisson(4.0, 200))
    posterior = exact_posterior(series)
    assert posterior.lambda1_mode == pytest.approx(4.0, rel=0.15)
    assert posterior.lambda2_mode == pytest.approx(4.0, rel=0.15)


def test_time_reversal_symmetry():
    series = step_series(5, 2.0, 5.0, 30, 50)
    forward = exact_posterior(series)
    backward = exact_posterior(series.reversed())
    assert backward.tau_pmf == pytest.approx(forward.tau_pmf[::-1], abs=1e-12)
    assert backward.lambda1_mode == pytest.approx(forward.lambda2_mode, rel=1e-6)
    assert backward.lambda2_mode == pytest.approx(forward.lambda1_mode, rel=1e-6)


def test_credible_days():
    window = AnalysisWindow(START, START + timedelta(days=5))
    posterior = SwitchpointPosterior(window, np.array([0.05, 0.6, 0.3, 0.05]), 1.0, 2.0, 1.0)
    assert posterior.map_day == START + timedelta(days=2)
    assert posterior.credible_days(0.9) == [START + timedelta(days=2), START + timedelta(days=3)]
    assert len(posterior.credible_days(0.95)) == 3


def test_mcmc_agrees_with_exact():
    # Half constant-rate series, half with a switch at day 50.
    for seed in range(20):
        after = 2.0 if seed % 2 == 0 else 6.0
        series = step_series(100 + seed, 2.0, after, 50, 50)
        exact = exact_posterior(series)
        sampled = mcmc_posterior(series, chains=4, draws=2000, seed=seed, warmup=1000, check=False)
        assert sampled.solver == "mcmc"
        assert total_variation(sampled.tau_pmf, exact.tau_pmf) < 0.05, seed
        assert sampled.lambda1_mode == pytest.approx(exact.lambda1_mode, rel=0.05), seed
        assert sampled.lambda2_mode == pytest.approx(exact.lambda2_mode, rel=0.05), seed
        assert sampled.lambda1_samples.size == 8000


def test_mcmc_recovers_switch():
    series = step_series(31, 1.0, 5.0, 200, 200)
    sampled = mcmc_posterior(series, chains=4, draws=2000, seed=2, warmup=1000)
    assert abs(sampled.map_index - 200) <= 2
    assert sampled.lambda1_mode == pytest.approx(1.0, abs=0.25)
    assert sampled.lambda2_mode == pytest.approx(5.0, abs=0.5)
    assert sampled.diagnostics["lambda1"]["rhat"] <= hmc.MAX_RHAT


def test_mcmc_is_deterministic():
    series = step_series(2, 1.0, 3.0, 30, 30)
    first = mcmc_posterior(series, chains=2, draws=1000, seed=9, warmup=200, check=False)
    second = mcmc_posterior(series, chains=2, draws=1000, seed=9, warmup=200, check=False)
    assert np.array_equal(first.tau_pmf, second.tau_pmf)
    assert np.array_equal(first.lambda1_samples, second.lambda1_samples)
    assert np.array_equal(first.tau_samples, second.tau_samples)


def test_mcmc_rejects_short_runs():
    series = step_series(2, 1.0, 3.0, 30, 30)
    with pytest.raises(ValidationError):
        mcmc_posterior(series, chains=1, draws=1000, seed=1)
    with pytest.raises(ValidationError):
        mcmc_posterior(series, chains=2, draws=500, seed=1)


def test_mcmc_convergence_failure():
    series = step_series(2, 1.0, 3.0, 30, 30)
    failing = {"lambda1": {"rhat": 1.3, "ess": 50.0}, "lambda2": {"rhat": 1.0, "ess": 5000.0}}
    with pytest.MonkeyPatch.context() as patch:
        patch.setattr(hmc, "diagnose", lambda samples: failing)
        with pytest.raises(ConvergenceError) as info:
            mcmc_posterior(series, chains=2, draws=1000, seed=3, warmup=200)
    assert info.value.diagnostics == failing


def test_check_convergence_thresholds():
    hmc.check_convergence({"a": {"rhat": 1.05, "ess": 400.0}}, ["a"])
    with pytest.raises(ConvergenceError):
        hmc.check_convergence({"a": {"rhat": 1.051, "ess": 4000.0}}, ["a"])
    with pytest.raises(ConvergenceError):
        hmc.check_convergence({"a": {"rhat": 1.0, "ess": 399.0}}, ["a"])


def test_convergence_diagnostics_on_independent_draws():
    rng = np.random.default_rng(0)
    stuck = np.repeat([[0.0], [0.0], [1.0], [1.0]], 2000, axis=1) + 1e-3 * rng.standard_normal((4, 2000))
    diagnostics = hmc.diagnose({"mixed": rng.standard_normal((4, 2000)), "stuck": stuck})
    assert diagnostics["mixed"]["rhat"] < 1.01
    assert diagnostics["mixed"]["ess"] > 4000
    assert diagnostics["stuck"]["rhat"] > 1.05
    with pytest.raises(ConvergenceError):
        hmc.check_convergence(diagnostics, ["mixed", "stuck"])


def test_switch_jump():
    window = AnalysisWindow(START, START + timedelta(days=4))
    posterior = SwitchpointPosterior(window, np.array([0.1, 0.8, 0.1]), 1.0, 5.0, 1.0)
    jumps = switch_jump(posterior, 3.0, "u")
    assert [j.day for j in jumps] == [START + timedelta(days=t) for t in (1, 2, 3)]
    assert jumps[1].magnitude == pytest.approx(0.8 * 4.0 / 3.0)
    peaked = SwitchpointPosterior(window, np.array([0.0, 1.0, 0.0]), 1.0, 5.0, 1.0)
    assert len(switch_jump(peaked, 3.0, "u")) == 1
    with pytest.raises(DegenerateInputError):
        switch_jump(posterior, 0.0, "u")


def test_switch_jumps_sum_to_mode_difference():
    series = step_series(8, 2.0, 5.0, 40, 40)
    posterior = exact_posterior(series)
    m = float(series.counts.mean())
    jumps = switch_jump(posterior, m, "u", floor=0.0)
    total = sum(j.magnitude for j in jumps)
    assert total == pytest.approx((posterior.lambda2_mode - posterior.lambda1_mode) / m, rel=1e-9)
    aggregated = aggregate_switch_jumps(jumps, series.window)
    assert aggregated.j_plus.sum() == pytest.approx(total, rel=1e-9)
    assert not aggregated.j_minus.any()


def test_pvalue_validation():
    series = step_series(1, 1.0, 3.0, 30, 30)
    posterior = exact_posterior(series)
    with pytest.raises(ValidationError):
        posterior_predictive_pvalue(posterior, series, replicates=50, seed=0)
    with pytest.raises(ValidationError):
        posterior_predictive_pvalue(posterior, series, replicates=200, seed=0, statistic="median")


def test_pvalue_is_deterministic_and_bounded():
    series = step_series(1, 1.0, 3.0, 30, 30)
    posterior = exact_posterior(series)
    first = posterior_predictive_pvalue(posterior, series, replicates=300, seed=5)
    assert first == posterior_predictive_pvalue(posterior, series, replicates=300, seed=5)
    assert 0.0 <= first <= 1.0


def test_validation_scenario_a():
    schedule = validation_scenarios()["A"]
    series = bin_daily(generate(schedule, seed=2020), schedule.window)
    posterior = exact_posterior(series)
    switches = [schedule.window.index_of(d) for d in schedule.switch_dates]
    assert min(abs(posterior.map_index - s) for s in switches) <= 3
    p_value = posterior_predictive_pvalue(posterior, series, replicates=1000, seed=1)
    assert 0.2 <= p_value <= 0.8
    # A single switch misses the second level change; deviance flags it.
    deviance = posterior_predictive_pvalue(posterior, series, replicates=1000, seed=1, statistic="deviance")
    assert deviance < 0.2


def test_pvalue_calibrated_on_single_switch():
    inside = 0
    for seed in range(100):
        series = step_series(500 + seed, 2.0, 6.0, 80, 80)
        p_value = posterior_predictive_pvalue(exact_posterior(series), series, replicates=200, seed=seed)
        inside += 0.05 <= p_value <= 0.95
    assert inside >= 90


def test_pvalue_calibrated_on_constant_rate():
    inside = 0
    for seed in range(100):
        series = series_of(np.random.default_rng(700 + seed).poisson(3.0, 120))
        p_value = posterior_predictive_pvalue(exact_posterior(series), series, replicates=200, seed=seed)
        inside += 0.05 <= p_value <= 0.95
    assert inside >= 90


def test_exact_posterior_ignores_days_before_window():
    rng = np.random.default_rng(12)
    counts = np.concatenate([rng.poisson(2.0, 30), rng.poisson(5.0, 30)])
    window = AnalysisWindow(START, START + timedelta(days=counts.size))

    def events_from(first_day, day_counts):
        return [Event(datetime(day.year, day.month, day.day, 12, tzinfo=timezone.utc))
                for day, count in ((first_day + timedelta(days=t), c) for t, c in enumerate(day_counts))
                for _ in range(int(count))]

    inside = events_from(START, counts)
    prefix = events_from(START - timedelta(days=40), np.full(40, 7))
    plain = exact_posterior(bin_daily(Timeline("u", events=tuple(inside)), window))
    padded = exact_posterior(bin_daily(Timeline("u", events=tuple(prefix + inside)), window))
    assert np.array_equal(plain.tau_pmf, padded.tau_pmf)
    assert padded.lambda1_mode == plain.lambda1_mode
    assert padded.lambda2_mode == plain.lambda2_mode


def run_tests():
    """Run all switchpoint module tests."""
    return run_module_tests("switchpoint", collect(globals()))


if __name__ == "__main__":
    sys.exit(0 if run_tests() else 1)
