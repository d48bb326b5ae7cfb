import numpy as np
import pytest

from bartree.model import BarParams
from bartree.noise import NoiseSpec


@pytest.fixture
def ref_params():
    return BarParams(1, (1.0, 0.5), (2.0, 0.3))


@pytest.fixture
def ref_spec():
    return NoiseSpec("gaussian-pair", 1.0, 0.5)


def random_stable_params(rng: np.random.Generator, p: int, radius: float = 0.9) -> BarParams:
    """Random coefficients whose slopes have l1 norm below ``radius`` on both sides."""
    def side():
        slopes = rng.uniform(-1, 1, p)
        slopes *= rng.uniform(0.05, radius) / np.sum(np.abs(slopes))
        return (float(rng.normal()), *map(float, slopes))

    return BarParams(p, side(), side())


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
