import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rlpost.dataset import SynthConfig, heterogeneous_config, noiseless_config, synth_generate  # noqa: E402
from rlpost.kernels import backends  # noqa: E402


@pytest.fixture(params=sorted(backends()))
def backend(request):
    return backends()[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture(scope="session")
def noiseless_ds():
    return synth_generate(noiseless_config(num_clips=12, num_classes=3, seed=3))


@pytest.fixture(scope="session")
def small_hetero_ds():
    return synth_generate(heterogeneous_config(num_clips=24, seed=5))


@pytest.fixture(scope="session")
def flip_ds():
    # class 0 impulsive, class 1 clean
    cfg = SynthConfig(
        num_clips=30, num_classes=2, seed=11, flip_prob=[0.15, 0.0], noise_sigma=0.0,
        event_rate=1.5, min_duration=1.5, max_duration=3.0, min_gap=1.5,
    )
    return synth_generate(cfg)


def pytest_terminal_summary(terminalreporter):
    import acceptance_log

    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(acceptance_log.LINES):
            terminalreporter.write_line(acceptance_log.LINES[number])
