"""
Tests for the test runner script (scripts/run_tests.py).
"""
import importlib.util
import sys
from argparse import Namespace
from pathlib import Path

import pytest

SCRIPT = Path(__file__).resolve().parent.parent / "scripts" / "run_tests.py"


@pytest.fixture(scope="module")
def runner():
    spec = importlib.util.spec_from_file_location("run_tests", SCRIPT)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def options(**overrides):
    values = dict(fast=False, acceptance=False, integration=False, coverage=False, files=[])
    values.update(overrides)
    return Namespace(**values)


class TestMarkerExpression:
    """Test marker selection."""

    @pytest.mark.parametrize("acceptance,integration,fast,expected", [
        (False, False, False, ""),
        (False, False, True, "not slow"),
        (True, False, False, "acceptance"),
        (True, True, False, "acceptance or integration"),
        (True, True, True, "(acceptance or integration) and not slow"),
    ])
    def test_combinations(self, runner, acceptance, integration, fast, expected):
        """Test each flag combination maps to the expected -m expression."""
        assert runner.marker_expression(acceptance, integration, fast) == expected


class TestPytestCommand:
    """Test the assembled pytest command line."""

    def test_default(self, runner):
        """Test no flags runs every test verbosely."""
        assert runner.pytest_command(options()) == [sys.executable, "-m", "pytest", "-v", "--tb=short"]

    def test_fast_coverage_with_files(self, runner):
        """Test markers, coverage and files are appended in that order."""
        cmd = runner.pytest_command(options(fast=True, coverage=True, files=["tests/test_dist.py"]))
        assert cmd[5:7] == ["-m", "not slow"]
        assert "--cov=wtapool" in cmd
        assert cmd[-1] == "tests/test_dist.py"
