import numpy as np
import pytest

from muskatsim import Field, PeriodicGrid


def band_limited(grid: PeriodicGrid, rng: np.random.Generator, kmax: int, decay: float = 1.0, amp: float = 1.0) -> Field:
    """Random real zero-mean field with modes 1 <= |k|_inf <= kmax and amplitude ~ amp/|k|^decay."""
    values = np.zeros(grid.shape)
    for k in np.ndindex(*[2 * kmax + 1] * grid.dim):
        kk = np.array(k) - kmax
        if not kk.any():
            continue
        phase = sum(ki * x for ki, x in zip(kk, grid.mesh))
        size = amp * rng.normal() / float(np.linalg.norm(kk)) ** decay
        values = values + size * np.cos(phase + rng.uniform(0, 2 * np.pi))
    return Field(grid, values - values.mean())


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def report(criterion: str, passed: bool, detail: str) -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
