import numpy as np
import pytest

from fdbreak.dataset import FunctionalDataset


def random_dataset(rng, n, size_range=(3, 7), scale=1.0, shift=None):
    """Random curves with uniform locations and Gaussian values."""
    sizes = rng.integers(size_range[0], size_range[1] + 1, size=n)
    x = rng.uniform(0.0, 1.0, sizes.sum())
    y = scale * rng.standard_normal(sizes.sum())
    if shift is not None:
        y = y + shift(x)
    return FunctionalDataset(x, y, np.concatenate([[0], np.cumsum(sizes)]))


def step_dataset(n, k0, level_pre, level_post, points=41):
    """Noise-free curves on a fixed dense grid, piecewise constant in time."""
    x = np.linspace(0.0, 1.0, points)
    curves = [(x, np.full(points, level_pre if i < k0 else level_post)) for i in range(n)]
    return FunctionalDataset.from_curves(curves)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, title: str, ok: bool, detail: str) -> bool:
    """Log one acceptance verdict; the lines are repeated in the terminal summary."""
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}: {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
