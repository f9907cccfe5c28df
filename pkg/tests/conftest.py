import numpy as np
import pytest

from monoscat.forward import DirectionGrid, SolverConfig
from monoscat.operators import far_field_matrix_from_contrast
from monoscat.scene import Disc, Scene, rasterize


@pytest.fixture(scope="session")
def small_disc_scene():
    return Scene([Disc(center=(0.0, 0.0), radius=1.0, q=1.0)], k=2.0, R=1.0)


@pytest.fixture(scope="session")
def small_disc_matrix(small_disc_scene):
    """Coarse (M=64, N=32) far field matrix of the unit disc, shared by cheap tests."""
    q = rasterize(small_disc_scene, 1.0, 64)
    return far_field_matrix_from_contrast(q, 2.0, DirectionGrid(32), SolverConfig(), threads=1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
