import time

import numpy as np
import pytest

from lvpi.data import SplitSpec, split_dataset
from lvpi.synthetic import SyntheticSpec, generate

ACCEPTANCE_LINES: list[str] = []
_SESSION_START = time.perf_counter()


def record_acceptance(name: str, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")


@pytest.fixture
def acceptance():
    return record_acceptance


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
    elapsed = time.perf_counter() - _SESSION_START
    ok = elapsed < 300
    terminalreporter.write_line(
        f"[{'PASS' if ok else 'FAIL'}] C7 suite runtime: {elapsed:.1f} s for this session (< 300 s)"
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_synthetic():
    ds, truth = generate(SyntheticSpec(n=1200, m=20, seed=3))
    return ds, truth


@pytest.fixture(scope="session")
def small_split(small_synthetic):
    ds, _ = small_synthetic
    return split_dataset(ds, SplitSpec(0.5, 0.25, 0.25, mode="random", seed=1))
