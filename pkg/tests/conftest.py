import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cattle_activity.dataset import SynthConfig, synth_generate  # noqa: E402
from cattle_activity.features import WindowConfig, build_feature_table  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_herd():
    """Four devices, 20 simulated minutes each."""
    return synth_generate(SynthConfig(n_devices=4, duration_s=1200.0), seed=11)


@pytest.fixture(scope="session")
def small_table(small_herd):
    return build_feature_table(small_herd, WindowConfig(window_length=60, step_length=30, max_lag=2))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
