from __future__ import annotations

import numpy as np
import pytest

from iotad.dataset import (
    SyntheticSpec,
    apply_minmax,
    filter_normal,
    fit_minmax,
    generate_synthetic,
    split_train_test,
)


def prepared_split(seed: int, spec: SyntheticSpec | None = None):
    """Synthetic frame -> 70:30 split -> normal-only train -> min-max on train."""
    frame = generate_synthetic(spec or SyntheticSpec(), seed)
    train, test = split_train_test(frame, 0.7, seed)
    train = filter_normal(train)
    scaler = fit_minmax(train)
    return apply_minmax(train, scaler), apply_minmax(test, scaler)


@pytest.fixture(scope="session")
def small_split():
    return prepared_split(0, SyntheticSpec(normal_count=400, anomaly_count=40, dimension=3))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def acceptance_log(pytestconfig):
    lines: list[str] = []
    pytestconfig._iotad_acceptance = lines
    return lines


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_iotad_acceptance", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in lines:
        terminalreporter.write_line(line)
