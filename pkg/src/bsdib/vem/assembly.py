"""Global bulk and surface operators, Dirichlet elimination and the reduction map."""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .. import kernels
from ..mesh import FaceTag, VertexTag


class AssemblyError(RuntimeError):
    pass


@dataclass
class DiscreteOperators:
    """Assembled operators.

    Bulk operators act on the free dofs ``0..n_omega-1`` (all vertices but the
    top face); surface operators on the ``n_gamma`` bottom vertices, which are
    also the first ``n_gamma`` bulk dofs so that ``R = [I; 0]``.
    """

    A_omega: sp.csr_matrix
    M_omega: np.ndarray  # lumped diagonal
    A_gamma: sp.csr_matrix
    M_gamma: np.ndarray  # lumped diagonal
    R: sp.csr_matrix
    dirichlet_dofs: np.ndarray
    A_omega_full: sp.csr_matrix
    M_omega_full: np.ndarray  # lumped, before elimination
    M_omega_consistent: sp.csr_matrix
    M_gamma_consistent: sp.csr_matrix
    cell_volumes: np.ndarray
    face_areas: np.ndarray

    @property
    def n_omega(self):
        return self.A_omega.shape[0]

    @property
    def n_gamma(self):
        return self.A_gamma.shape[0]


def _scatter(ptr, verts, flat, n):
    sizes = np.diff(ptr)
    sq = sizes * sizes
    owner = np.repeat(np.arange(len(sizes)), sq)
    within = np.arange(sq.sum()) - np.repeat(np.cumsum(sq) - sq, sq)
    m = sizes[owner]
    base = ptr[:-1][owner]
    rows = verts[base + within // m]
    cols = verts[base + within % m]
    return sp.coo_matrix((flat, (rows, cols)), shape=(n, n)).tocsr(), rows


def _symmetrize(A):
    A = 0.5 * (A + A.T)
    A = A.tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def assemble_global(mesh):
    """Assemble stiffness and lumped mass matrices for bulk and surface."""
    nv = mesh.n_vertices
    cv_ptr, cv = mesh.cell_vertex_csr()
    K, M, vols, _ = kernels.cell_matrices(
        mesh.vertices, mesh.face_ptr, mesh.face_verts, mesh.cell_ptr, mesh.cell_faces,
        mesh.cell_orient, cv_ptr, cv,
    )
    A_full, rows = _scatter(cv_ptr, cv, K, nv)
    A_full = _symmetrize(A_full)
    M_cons, _ = _scatter(cv_ptr, cv, M, nv)
    M_cons = _symmetrize(M_cons)
    M_lumped = np.bincount(rows, weights=M, minlength=nv)

    ng = mesh.n_gamma
    gids = np.flatnonzero(mesh.face_tags == FaceTag.GAMMA)
    sizes = mesh.face_ptr[gids + 1] - mesh.face_ptr[gids]
    fptr = np.concatenate([[0], np.cumsum(sizes)])
    fverts = np.concatenate([mesh.face(f) for f in gids]) if len(gids) else np.zeros(0, np.int64)
    if fverts.size and fverts.max() >= ng:
        raise AssemblyError("surface face references a non-surface vertex")
    Kg, Mg, areas, _ = kernels.face_matrices(mesh.vertices, mesh.face_ptr, mesh.face_verts, gids)
    A_gamma, grows = _scatter(fptr, fverts, Kg, ng)
    A_gamma = _symmetrize(A_gamma)
    Mg_cons, _ = _scatter(fptr, fverts, Mg, ng)
    Mg_cons = _symmetrize(Mg_cons)
    M_gamma = np.bincount(grows, weights=Mg, minlength=ng)

    top = np.flatnonzero(mesh.vertex_tags == VertexTag.ON_GAMMA_T)
    n_free = nv - len(top)
    if len(top) and top[0] != n_free:
        raise AssemblyError("top-face vertices must be numbered last")
    A_omega = A_full[:n_free, :n_free].tocsr()
    M_omega = M_lumped[:n_free].copy()
    if np.any(M_omega <= 0) or np.any(M_gamma <= 0):
        raise AssemblyError("singular lumped mass (non-positive row sum): broken mesh")
    R = sp.eye(n_free, ng, format="csr")
    return DiscreteOperators(
        A_omega=A_omega,
        M_omega=M_omega,
        A_gamma=A_gamma,
        M_gamma=M_gamma,
        R=R,
        dirichlet_dofs=top,
        A_omega_full=A_full,
        M_omega_full=M_lumped,
        M_omega_consistent=M_cons,
        M_gamma_consistent=Mg_cons,
        cell_volumes=vols,
        face_areas=areas,
    )


def boundary_vertices(mesh):
    """Indices of vertices on the boundary of the cube."""
    X = mesh.vertices
    tol = 1e-10 * mesh.L
    return np.flatnonzero(np.any((np.abs(X) <= tol) | (np.abs(X - mesh.L) <= tol), axis=1))


def solve_dirichlet(A, load, bnd, values):
    """Solve ``A u = load`` with ``u[bnd] = values`` imposed by elimination."""
    n = A.shape[0]
    free = np.setdiff1d(np.arange(n), bnd)
    u = np.zeros(n)
    u[bnd] = values
    rhs = load[free] - A[free][:, bnd] @ values
    u[free] = spla.spsolve(A[free][:, free].tocsc(), rhs)
    return u


def solve_poisson_patch(mesh, p, ops=None):
    """Discrete Laplace problem with Dirichlet data ``p`` on the whole boundary.

    ``p`` is a callable ``p(X) -> values`` on an ``(n, 3)`` coordinate array.
    For linear ``p`` the result is the exact nodal interpolant.
    """
    ops = ops or assemble_global(mesh)
    bnd = boundary_vertices(mesh)
    g = np.asarray(p(mesh.vertices[bnd]), dtype=float)
    return solve_dirichlet(ops.A_omega_full, np.zeros(mesh.n_vertices), bnd, g)


def dump_coo(A, path):
    """Write ``A`` as sorted ``row col value`` lines with 17 significant digits."""
    C = sp.coo_matrix(A)
    order = np.lexsort((C.col, C.row))
    with open(path, "w") as fh:
        for i, j, v in zip(C.row[order], C.col[order], C.data[order]):
            fh.write(f"{i} {j} {v:.17g}\n")
