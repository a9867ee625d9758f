import sys

import numpy as np
import pytest

from bsdib.mesh import GradedMeshSpec, build_graded_mesh, build_uniform_mesh
from bsdib.vem import assemble_global


@pytest.fixture(scope="session")
def unit_cube():
    return build_uniform_mesh(1.0, 1)


@pytest.fixture(scope="session")
def uniform2():
    return build_uniform_mesh(1.0, 2)


@pytest.fixture(scope="session")
def graded_142():
    return build_graded_mesh(GradedMeshSpec(L=1.0, nx=4, fine_layers=1, coarse_levels=2))


@pytest.fixture(scope="session")
def small_mesh():
    """Graded 8x8 surface on the physical box, cheap enough for many time steps."""
    return build_graded_mesh(GradedMeshSpec(L=50.0, nx=8, fine_layers=2, coarse_levels=2))


@pytest.fixture(scope="session")
def small_ops(small_mesh):
    return assemble_global(small_mesh)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
