import numpy as np
import pytest

from bowgen.model import ModelConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_config():
    return ModelConfig(d_model=8, n_heads=2, d_ff=16, n_levels=2, n_blocks=1,
                       lstm_dim=8, segment_len=16)


def jitter(weights, rng, scale=0.05):
    """Move parameters off exact zeros so ReLU/L1 kinks are not hit by finite differences."""
    for p in weights.params.values():
        p.data += scale * rng.standard_normal(p.shape).astype(p.data.dtype)
    return weights


ACCEPTANCE_LINES = []


def record(name, passed, detail):
    """Store one acceptance line; printed in the terminal summary."""
    line = f"{'PASS' if passed else 'FAIL'}  {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
