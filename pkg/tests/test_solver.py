"""
Tests for numerical equilibria (solver.py).
"""
import logging

import pytest

from wtapool.analytic import symmetric_equilibria_two_process
from wtapool.config import settings
from wtapool.dist import compare
from wtapool.errors import ConsistencyError, ConvergenceError, DomainError
from wtapool.game import PayoffTensor, payoff_tensor_for_rates
from wtapool.models import MixedStrategy
from wtapool.solver import (
    best_response_dynamics,
    diversification_metric,
    find_symmetric_equilibrium,
    profile_regret,
    run_seeds,
    symmetric_regret,
)


@pytest.fixture(scope="module")
def dominant_tensor():
    """Two agents, rates (2, 1): the first process dominates."""
    return payoff_tensor_for_rates(2, [2.0, 1.0])


class TestRegret:
    """Test regret certificates."""

    def test_uniform_on_identical_rates(self):
        """Test uniform play over identical processes has zero regret."""
        tensor = payoff_tensor_for_rates(3, [1.0, 1.0, 1.0])
        regret, dev = symmetric_regret([1 / 3] * 3, tensor)
        assert regret == pytest.approx(0.0, abs=1e-12)
        assert dev == pytest.approx([0.0, 0.0, 0.0], abs=1e-12)

    def test_pure_favorite_at_threshold(self, two_outcome_tensor):
        """Test all agents on the favorite is an equilibrium for c = n-1."""
        regret, _ = symmetric_regret([1.0, 0.0], two_outcome_tensor(3, 2.0))
        assert regret == pytest.approx(0.0, abs=1e-12)

    def test_pure_favorite_below_threshold(self, two_outcome_tensor):
        """Test the lone underdog gains 0.2 at c=1.5."""
        regret, dev = symmetric_regret([1.0, 0.0], two_outcome_tensor(3, 1.5))
        assert regret == pytest.approx(0.2, abs=1e-12)
        assert dev[1] == pytest.approx(0.2, abs=1e-12)

    def test_intro_profile_regret(self, intro_tensor):
        """Test the all-favorite profile of the intro pool has regret 0.2."""
        regret, per_agent = profile_regret([[1.0, 0.0]] * 3, intro_tensor)
        assert regret == pytest.approx(0.2, abs=1e-12)
        assert per_agent == pytest.approx([0.2, 0.2, 0.2], abs=1e-12)

    def test_asymmetric_pure_profile(self):
        """Test the split (1, 1, 2) of rates (1.25, 1) is an equilibrium."""
        tensor = payoff_tensor_for_rates(3, [1.25, 1.0])
        regret, _ = profile_regret([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]], tensor)
        assert regret <= 1e-12

    def test_pure_profiles(self, dominant_tensor):
        """Test both agents on the top-rate process is an equilibrium and both on the other is not."""
        top, other = MixedStrategy.pure(2, 0).probs, MixedStrategy.pure(2, 1).probs
        regret, _ = profile_regret([top, top], dominant_tensor)
        assert regret == pytest.approx(0.0, abs=1e-12)
        regret, per_agent = profile_regret([other, other], dominant_tensor)
        assert regret > 0
        assert per_agent[0] == pytest.approx(per_agent[1], abs=1e-12)

    def test_not_zero_sum(self, intro_tensor):
        """Test a shifted tensor is reported as inconsistent."""
        shifted = PayoffTensor(3, 2, intro_tensor.counts, intro_tensor.payoffs + 0.5)
        with pytest.raises(ConsistencyError):
            symmetric_regret([0.5, 0.5], shifted)

    def test_profile_length(self, intro_tensor):
        """Test a profile with the wrong number of agents raises DomainError."""
        with pytest.raises(DomainError):
            profile_regret([[1.0, 0.0]] * 2, intro_tensor)


class TestFindSymmetricEquilibrium:
    """Test the symmetric search."""

    def test_dominant_process(self, dominant_tensor):
        """Test two agents settle on the top-rate process."""
        results = find_symmetric_equilibrium(dominant_tensor, starts=4, seed=1)
        assert len(results) == 1
        assert results[0].profile[0].probs == pytest.approx([1.0, 0.0], abs=1e-6)
        assert results[0].symmetric

    def test_matches_closed_form(self):
        """Test n=3, rates (1.25, 1) against (2c-1)/(c+1)."""
        tensor = payoff_tensor_for_rates(3, [1.25, 1.0])
        c = compare(1.25, 1.0).odds_ratio
        results = find_symmetric_equilibrium(tensor, starts=4, seed=7)
        assert results
        for result in results:
            assert result.profile[0].probs[0] == pytest.approx((2 * c - 1) / (c + 1), abs=1e-4)

    def test_identical_rates_split_evenly(self):
        """Test four agents on two identical processes mix one half each."""
        results = find_symmetric_equilibrium(payoff_tensor_for_rates(4, [1.0, 1.0]), starts=3)
        assert len(results) == 1
        assert results[0].profile[0].probs == pytest.approx([0.5, 0.5], abs=1e-5)

    def test_regret_is_certified(self, two_outcome_tensor):
        """Test the reported regret agrees with the direct expectation."""
        tensor = two_outcome_tensor(4, 1.3)
        for result in find_symmetric_equilibrium(tensor, starts=3, seed=3):
            direct, _ = profile_regret([s.probs for s in result.profile], tensor)
            assert result.regret < settings.solver_tol
            assert abs(direct - result.regret) < 1e-9

    def test_scale_invariance(self, two_outcome_tensor):
        """Test scaling payoffs by 3 leaves the equilibrium unchanged."""
        tensor = two_outcome_tensor(3, 1.3)
        scaled = PayoffTensor(3, 2, tensor.counts, tensor.payoffs * 3)
        base = find_symmetric_equilibrium(tensor, starts=2, seed=5)[0].profile[0].probs
        other = find_symmetric_equilibrium(scaled, starts=2, seed=5)[0].profile[0].probs
        assert other == pytest.approx(base, abs=1e-6)

    def test_deterministic(self, two_outcome_tensor):
        """Test equal seeds give equal results."""
        tensor = two_outcome_tensor(3, 1.7)
        first = find_symmetric_equilibrium(tensor, starts=2, seed=11)
        second = find_symmetric_equilibrium(tensor, starts=2, seed=11)
        assert [r.profile[0].probs for r in first] == [r.profile[0].probs for r in second]

    def test_no_convergence_is_logged(self, dominant_tensor, monkeypatch, caplog):
        """Test a failed search returns nothing and logs the regret of every start."""
        monkeypatch.setattr(settings, "max_iterations", 1)
        with caplog.at_level(logging.WARNING, logger="wtapool.solver"):
            results = find_symmetric_equilibrium(dominant_tensor, starts=3, seed=2)
        assert results == []
        assert "No symmetric equilibrium from 3 starts" in caplog.text
        assert "per start" in caplog.text

    @pytest.mark.parametrize("kwargs", [{"starts": 0}, {"seed": -1}, {"tol": 0.0}])
    def test_invalid_arguments(self, dominant_tensor, kwargs):
        """Test bad starts, seeds and tolerances raise DomainError."""
        with pytest.raises(DomainError):
            find_symmetric_equilibrium(dominant_tensor, **kwargs)


class TestBestResponseDynamics:
    """Test one run of smoothed best response dynamics."""

    def test_dominant_process(self, dominant_tensor):
        """Test both agents converge to the top-rate process."""
        result = best_response_dynamics(dominant_tensor, seed=3)
        assert result.converged
        assert result.regret < settings.solver_tol
        for strategy in result.profile:
            assert strategy.probs == pytest.approx([1.0, 0.0], abs=1e-6)

    def test_identical_processes(self):
        """Test two agents on identical processes converge at the first check."""
        result = best_response_dynamics(payoff_tensor_for_rates(2, [1.0, 1.0]), seed=0)
        assert result.converged
        assert result.iterations == settings.polish_every

    def test_asymmetric_equilibria(self):
        """Test three agents on rates (1.25, 1) split below the symmetric weight."""
        tensor = payoff_tensor_for_rates(3, [1.25, 1.0])
        (eq,) = symmetric_equilibria_two_process(3, compare(1.25, 1.0).odds_ratio)
        results = [best_response_dynamics(tensor, seed=seed) for seed in range(6)]
        assert all(r.converged for r in results)
        assert any(not r.symmetric for r in results)
        weights = [r.agent_average()[0] for r in results]
        assert sum(weights) / len(weights) < 0.76 < eq.s1

    def test_symmetric_start_is_not_polished_early(self, monkeypatch):
        """Test a run that stops at the first check has not been snapped to the interior point."""
        tensor = payoff_tensor_for_rates(3, [1.25, 1.0])
        monkeypatch.setattr(settings, "max_iterations", settings.polish_every)
        result = best_response_dynamics(tensor, seed=0)
        assert result.iterations == settings.polish_every
        assert not (result.converged and result.symmetric)

    def test_deterministic(self, dominant_tensor):
        """Test the run depends on the seed only."""
        first = best_response_dynamics(dominant_tensor, seed=42)
        second = best_response_dynamics(dominant_tensor, seed=42)
        assert [s.probs for s in first.profile] == [s.probs for s in second.profile]

    def test_budget_exhausted(self, dominant_tensor, monkeypatch):
        """Test a run without enough sweeps is returned unconverged."""
        monkeypatch.setattr(settings, "max_iterations", 1)
        result = best_response_dynamics(dominant_tensor, seed=0)
        assert not result.converged
        assert result.iterations == 1


class TestDiversificationMetric:
    """Test ensembles of dynamics runs."""

    def test_run_seeds(self):
        """Test run seeds are reproducible 64-bit integers."""
        seeds = run_seeds(9, 5)
        assert seeds == run_seeds(9, 5)
        assert len(set(seeds)) == 5
        assert all(0 <= s < 2 ** 64 for s in seeds)

    def test_single_run(self, dominant_tensor):
        """Test t=1 reproduces the agent average of the derived run."""
        metric = diversification_metric(dominant_tensor, t=1, seed=4, workers=1)
        run = best_response_dynamics(dominant_tensor, seed=run_seeds(4, 1)[0])
        assert metric.avg_probs == run.agent_average().tolist()
        assert metric.t == 1
        assert metric.requested == 1

    def test_workers_do_not_change_result(self, dominant_tensor):
        """Test aggregation in run order makes the metric independent of worker count."""
        serial = diversification_metric(dominant_tensor, t=4, seed=2, workers=1)
        parallel = diversification_metric(dominant_tensor, t=4, seed=2, workers=4)
        assert serial.avg_probs == parallel.avg_probs
        assert serial.per_run == parallel.per_run

    def test_dominant_metric(self, dominant_tensor):
        """Test every run of a dominant pool picks the top process."""
        metric = diversification_metric(dominant_tensor, t=5, seed=0)
        assert metric.avg_probs == pytest.approx([1.0, 0.0], abs=1e-6)
        assert metric.dispersion == pytest.approx([0.0, 0.0], abs=1e-6)

    def test_below_symmetric_value(self):
        """Test the ensemble for rates (1.25, 1) sits clearly below the symmetric weight."""
        tensor = payoff_tensor_for_rates(3, [1.25, 1.0])
        (eq,) = symmetric_equilibria_two_process(3, compare(1.25, 1.0).odds_ratio)
        metric = diversification_metric(tensor, t=10, seed=0)
        assert metric.avg_probs[0] < eq.s1 - 0.05
        assert metric.t == 10

    def test_identical_rates_split_evenly(self):
        """Test three agents on two identical processes use both about equally."""
        metric = diversification_metric(payoff_tensor_for_rates(3, [1.0, 1.0]), t=100, seed=0)
        assert metric.avg_probs == pytest.approx([0.5, 0.5], abs=0.05)

    def test_too_many_failures(self, dominant_tensor, monkeypatch):
        """Test ConvergenceError carries the failed seeds."""
        monkeypatch.setattr(settings, "max_iterations", 1)
        with pytest.raises(ConvergenceError) as info:
            diversification_metric(dominant_tensor, t=3, seed=0)
        assert info.value.diagnostics["requested"] == 3
        assert info.value.diagnostics["failed_seeds"] == run_seeds(0, 3)

    def test_invalid_run_count(self, dominant_tensor):
        """Test t < 1 raises DomainError."""
        with pytest.raises(DomainError):
            diversification_metric(dominant_tensor, t=0)


@pytest.mark.slow
class TestAgainstAnalytic:
    """Test numerical equilibria of two-option pools against the polynomial roots."""

    @pytest.mark.parametrize("n,c", [(3, 1.3), (4, 0.9), (5, 2.2)])
    def test_symmetric_search(self, two_outcome_tensor, n, c):
        """Test the symmetric search finds the polynomial root."""
        (expected,) = symmetric_equilibria_two_process(n, c)
        results = find_symmetric_equilibrium(two_outcome_tensor(n, c), starts=4, seed=0)
        assert results
        for result in results:
            assert result.profile[0].probs[0] == pytest.approx(expected.s1, abs=1e-5)

