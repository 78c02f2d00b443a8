import time

import numpy as np
import pytest

from spraysim import FieldSpec, RunConfig, generate_fields, run_matrix
from spraysim.field_io import rectangle

# acceptance lines collected during the run, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []

SYNTHETIC_SEED = 1
SYNTHETIC_COUNT = 6


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def record():
    """Print and keep one pass/fail line per acceptance criterion."""

    def _record(number: int, ok: bool, text: str) -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {text}"
        print(line)
        ACCEPTANCE_LINES.append(line)

    return _record


@pytest.fixture(scope="session")
def cfg():
    return RunConfig()


@pytest.fixture(scope="session")
def small_field():
    """About 1.4 ha with three lanes; fast to simulate."""
    c = rectangle(140.0, 100.0)
    return FieldSpec("small", c, [], c[0].copy()).validate()


@pytest.fixture(scope="session")
def small_matrix(small_field, cfg):
    return run_matrix(small_field, cfg)


@pytest.fixture(scope="session")
def synthetic_runs(cfg):
    """Full six-setup matrix on the seeded synthetic fields, with runtimes."""
    out = []
    for spec in generate_fields(SYNTHETIC_COUNT, SYNTHETIC_SEED):
        t0 = time.perf_counter()
        res = run_matrix(spec, cfg, keep_maps=False)
        out.append((res, time.perf_counter() - t0))
    return out


def is_convex_field(spec: FieldSpec) -> bool:
    if spec.obstacles:
        return False
    c = spec.contour
    e = np.roll(c, -1, axis=0) - c
    cross = e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)
    return bool(np.all(cross >= -1e-9) or np.all(cross <= 1e-9))
