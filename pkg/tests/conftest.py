import numpy as np
import pytest

from sblfem.geometry import StraightEdge, TransfiniteMap
from sblfem.mesh import (
    EdgeLink,
    build_asymptotic_mesh,
    build_sbl_mesh,
    mesh_from_elements,
)
from sblfem.geometry import Circle, Cranioid


def square_map(x0=0.0, y0=0.0, sx=1.0, sy=1.0):
    """Axis-aligned rectangle [x0, x0+sx] x [y0, y0+sy] as a transfinite map."""
    c00 = (x0, y0)
    c10 = (x0 + sx, y0)
    c11 = (x0 + sx, y0 + sy)
    c01 = (x0, y0 + sy)
    return TransfiniteMap(
        StraightEdge(c00, c10),
        StraightEdge(c10, c11),
        StraightEdge(c01, c11),
        StraightEdge(c00, c01),
    )


def single_square_mesh():
    """One unit square with all four sides Dirichlet."""
    return mesh_from_elements(
        [square_map()], edges=[], boundary_sides=[(0, s) for s in range(4)]
    )


def two_square_mesh():
    """[0,1]^2 and [1,2]x[0,1] glued along x = 1 (east side 1 to west side 3)."""
    maps = [square_map(), square_map(x0=1.0)]
    edges = [EdgeLink((0, 1), (1, 3), +1)]
    boundary = [(0, 0), (0, 2), (0, 3), (1, 0), (1, 1), (1, 2)]
    return mesh_from_elements(maps, edges=edges, boundary_sides=boundary)


@pytest.fixture(scope="session")
def disk_base():
    return build_asymptotic_mesh(Circle(1.0), m=2)


@pytest.fixture(scope="session")
def disk_sbl(disk_base):
    return build_sbl_mesh(disk_base, kappa=1.0, p=4, eps1=1e-9, eps2=1e-3)


@pytest.fixture(scope="session")
def cranioid_base():
    return build_asymptotic_mesh(Cranioid(), m=2)


@pytest.fixture(scope="session")
def cranioid_sbl(cranioid_base):
    return build_sbl_mesh(cranioid_base, kappa=1.0, p=4, eps1=1e-9, eps2=1e-3)
