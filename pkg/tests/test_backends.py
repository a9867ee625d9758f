import os
import subprocess
import sys

import numpy as np
import pytest

from bsdib import kernels
from bsdib.kinetics import ModelParameters
from bsdib.mesh import GradedMeshSpec, build_graded_mesh
from bsdib.solver import TimeSteppingConfig, run_simulation

py = kernels.get_backend("python")
try:
    cy = kernels.get_backend("cython")
except ImportError:  # extension not built
    cy = None

needs_ext = pytest.mark.skipif(cy is None, reason="compiled kernels not built")


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_env_forces_python():
    env = dict(os.environ, BSDIB_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import bsdib.kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@needs_ext
@pytest.mark.parametrize("spec", [GradedMeshSpec(1.0, 4, 1, 2), GradedMeshSpec(50.0, 16, 2, 3)])
def test_cell_and_face_kernels_agree(spec):
    m = build_graded_mesh(spec)
    cv_ptr, cv = m.cell_vertex_csr()
    args = (m.vertices, m.face_ptr, m.face_verts, m.cell_ptr, m.cell_faces, m.cell_orient, cv_ptr, cv)
    for a, b in zip(py.cell_matrices(*args), cy.cell_matrices(*args)):
        a, b = np.asarray(a), np.asarray(b)
        assert np.abs(a - b).max() <= 1e-13 * np.abs(a).max()
    ids = np.arange(m.n_faces, dtype=np.int64)
    for a, b in zip(py.face_matrices(m.vertices, m.face_ptr, m.face_verts, ids),
                    cy.face_matrices(m.vertices, m.face_ptr, m.face_verts, ids)):
        a, b = np.asarray(a), np.asarray(b)
        assert np.abs(a - b).max() <= 1e-13 * np.abs(a).max()


@needs_ext
@pytest.mark.parametrize("coupled", [True, False])
def test_imex_rhs_agree(coupled):
    rng = np.random.default_rng(0)
    ng, nb = 30, 70
    p = ModelParameters(B=66, C=3, gamma=0.2, psi_eta=0.3, psi_theta=0.2, d_omega=1.5).packed()
    bt, qt = rng.normal(size=nb), rng.normal(size=nb)
    eta, theta = rng.normal(size=ng), rng.uniform(0, 1, ng)
    Mo, Mg = rng.uniform(0.1, 2, nb), rng.uniform(0.1, 2, ng)
    outs = []
    for k in (py, cy):
        o = [np.full(nb, np.nan), np.full(nb, np.nan), np.empty(ng), np.empty(ng)]
        if coupled:
            k.imex_rhs(bt, qt, eta, theta, Mo, Mg, p, 0.01, True, *o)
        else:
            e = np.zeros(0)
            k.imex_rhs(e, e, eta, theta, e, Mg, p, 0.01, False, e, e, o[2], o[3])
        outs.append(o)
    for a, b in zip(*outs):
        np.testing.assert_allclose(a, b, rtol=1e-14, atol=1e-14)


@needs_ext
def test_short_runs_agree(small_mesh, small_ops):
    p = ModelParameters(B=66, C=3, gamma=0.2, psi_eta=0.2, psi_theta=0.2)
    cfg = TimeSteppingConfig(tau=2e-3, T=0.5, seed=3)
    a = run_simulation(small_mesh, p, cfg, ops=small_ops, backend=py)
    b = run_simulation(small_mesh, p, cfg, ops=small_ops, backend=cy)
    np.testing.assert_allclose(a.eta, b.eta, rtol=0, atol=1e-12)
    np.testing.assert_allclose(a.state.bt, b.state.bt, rtol=0, atol=1e-12)
