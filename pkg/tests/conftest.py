import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from flowtune.dataset import FlowDataset, SynthesisSpec, synthesize

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def small_data() -> FlowDataset:
    return synthesize(SynthesisSpec(n_per_class=(40, 40, 40, 40), seed=3))


@pytest.fixture
def separable_1d() -> FlowDataset:
    x = np.concatenate([-np.arange(1, 11, dtype=float), np.arange(0, 10, dtype=float)])
    y = (x >= 0).astype(int)
    return FlowDataset(x[:, None], y, ("x",), ("normal", "loss"))


def split_by_class(n_per_class, seed=0):
    """Tiny helper for tests that need tune/validation pairs."""
    data = synthesize(SynthesisSpec(n_per_class=n_per_class, seed=seed))
    rng = np.random.default_rng(seed)
    idx = rng.permutation(data.n_rows)
    cut = int(0.7 * data.n_rows)
    return data.subset(np.sort(idx[:cut])), data.subset(np.sort(idx[cut:]))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import VERDICTS
    except ImportError:
        return
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
