import numpy as np
import pytest

from wannier_ladder import lattice as lat
from wannier_ladder import pipeline as pl

PI = np.pi

DIRICHLET = (lat.BoundaryCondition.DIRICHLET, lat.BoundaryCondition.DIRICHLET)
PERIODIC = (lat.BoundaryCondition.PERIODIC, lat.BoundaryCondition.PERIODIC)

TRIVIAL_DIRICHLET = lat.HaldaneParams(1.0, 0.1, 1.0, PI / 2)       # gapped, Chern 0
TRIVIAL_PERIODIC = lat.HaldaneParams(1.0, 0.0, 1.0, PI / 2)        # gapped, Chern 0
TOPOLOGICAL = lat.HaldaneParams(1.0, 0.25, 0.0, PI / 2)            # gapped, |Chern| 1
DEEP_TRIVIAL = lat.HaldaneParams(0.25, 0.0, 1.0, 0.0)              # near-atomic, real
ATOMIC = lat.HaldaneParams(0.0, 0.0, 1.0, 0.0)

GEOM12 = lat.LatticeGeometry(12, 12)
GEOM24 = lat.LatticeGeometry(24, 24)


@pytest.fixture(scope="session")
def dirichlet_trivial_24():
    return pl.run_pipeline(GEOM24, TRIVIAL_DIRICHLET, DIRICHLET)


@pytest.fixture(scope="session")
def dirichlet_trivial_12():
    return pl.run_pipeline(GEOM12, TRIVIAL_DIRICHLET, DIRICHLET)


@pytest.fixture(scope="session")
def periodic_trivial_24():
    return pl.run_pipeline(GEOM24, TRIVIAL_PERIODIC, PERIODIC, gap_threshold=0.3)


@pytest.fixture(scope="session")
def periodic_deep_trivial_24():
    return pl.run_pipeline(GEOM24, DEEP_TRIVIAL, PERIODIC, gap_threshold=0.3)


@pytest.fixture(scope="session")
def atomic_24():
    return pl.run_pipeline(GEOM24, ATOMIC, PERIODIC, gap_threshold=0.5)
