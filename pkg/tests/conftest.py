import numpy as np
import pytest

from elastorefine.grid import Grid2D, GridGeometry


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_grid(rng, rows=8, cols=8, da=0.7, dl=1.3):
    return Grid2D(GridGeometry(rows, cols, da, dl), rng.standard_normal((rows, cols)))
