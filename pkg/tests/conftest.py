"""Shared test fixtures: a small two-arm synthetic world and tmp helpers."""

import pytest

from driftbeam import DecodeConfig
from driftbeam.backends.synthetic import SyntheticModel, SyntheticTask

# Populated by tests/test_acceptance.py; echoed after the run so the
# acceptance verdicts survive output capture.
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def two_arm_task() -> SyntheticTask:
    return SyntheticTask.two_arm()


@pytest.fixture
def two_arm_model(two_arm_task) -> SyntheticModel:
    return SyntheticModel(two_arm_task)


@pytest.fixture
def small_config() -> DecodeConfig:
    """Cheap decode knobs for loop-shape tests (not tuned for accuracy)."""
    return DecodeConfig(
        beam_size=2,
        rollouts_per_candidate=2,
        rollout_depth=4,
        max_steps=8,
        lambda1=0.8,
        epsilon_stop=1e-6,
        seed=7,
    )
