import numpy as np
import pytest

from mfemskin import demo
from mfemskin.geometry import TetMesh


@pytest.fixture
def rng():
    return np.random.default_rng(20260815)


@pytest.fixture
def single_tet():
    vertices = np.array(
        [
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ]
    )
    return TetMesh(vertices=vertices, tets=np.array([[0, 1, 2, 3]]))


@pytest.fixture
def two_tets():
    # two tets sharing the (1, 2, 3) face
    vertices = np.array(
        [
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [1.0, 1.0, 1.0],
        ]
    )
    return TetMesh(vertices=vertices, tets=np.array([[0, 1, 2, 3], [4, 1, 3, 2]]))


@pytest.fixture
def beam_mesh():
    return demo.beam_mesh(nx=4, ny=2, nz=2)


@pytest.fixture
def beam_skeleton():
    return demo.beam_skeleton()
