import numpy as np
import pytest

from radgas.grid import Grid
from radgas.initial_data import band_limited_random

GRIDS = {1: Grid(1, 64, 2 * np.pi * 4), 2: Grid(2, 32, 2 * np.pi * 2), 3: Grid(3, 16, 2 * np.pi)}


def random_field(grid, seed=0, band=None):
    """Band-limited random field with no Nyquist content."""
    band = band if band is not None else grid.N // 3
    return band_limited_random(grid, seed=seed, band=band, amplitude=1.0)


def rel(a, b):
    a, b = np.asarray(a), np.asarray(b)
    scale = max(np.linalg.norm(b.ravel()), 1e-300)
    return float(np.linalg.norm((a - b).ravel()) / scale)


@pytest.fixture(params=[1, 2, 3], ids=lambda n: f"n{n}")
def grid(request):
    return GRIDS[request.param]


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
