"""
Configuration for pytest.

Registers markers and provides the small pools used across suites.
"""
import pytest

from wtapool.game import exact_payoff_tensor, two_outcome_distribution
from wtapool.models import OrderedPartition, OutcomeDistribution


def pytest_configure(config):
    """Configure pytest with custom markers."""
    config.addinivalue_line(
        "markers", "slow: marks tests as slow (deselect with '-m \"not slow\"')"
    )
    config.addinivalue_line(
        "markers", "integration: marks tests as integration tests"
    )
    config.addinivalue_line(
        "markers", "unit: marks tests as unit tests"
    )
    config.addinivalue_line(
        "markers", "acceptance: end-to-end checks of published results"
    )


def make_partition(*blocks):
    return OrderedPartition(blocks=tuple(frozenset(b) for b in blocks))


@pytest.fixture(scope="session")
def intro_outcome():
    """Two options; option 1 finishes first with probability 0.6."""
    return OutcomeDistribution(support=[
        (make_partition({0}, {1}), 0.6),
        (make_partition({1}, {0}), 0.4),
    ])


@pytest.fixture(scope="session")
def intro_tensor(intro_outcome):
    """Three agents on the intro pool."""
    return exact_payoff_tensor(3, intro_outcome)


@pytest.fixture(scope="session")
def counterexample_outcome():
    """
    Five options, four equally likely rankings; option 5 is most often first
    but the best replies depend on the opponent's choice.
    """
    rankings = [
        ({4}, {0}, {1}, {3}, {2}),
        ({4}, {3}, {2}, {0}, {1}),
        ({0}, {1}, {3}, {2}, {4}),
        ({3}, {2}, {0}, {1}, {4}),
    ]
    return OutcomeDistribution(support=[(make_partition(*r), 0.25) for r in rankings])


@pytest.fixture(scope="session")
def counterexample_tensor(counterexample_outcome):
    return exact_payoff_tensor(2, counterexample_outcome)


@pytest.fixture
def two_outcome_tensor():
    """Factory for the tie-free two-option pool with odds ratio c."""
    def _make(n, c):
        return exact_payoff_tensor(n, two_outcome_distribution(c))
    return _make
