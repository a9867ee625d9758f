"""Pure-Python kernels; reference semantics for the compiled ``_ckernels``."""

import numpy as np

from .vem.local import local_cell_matrices, local_face_matrices


def cell_matrices(vertices, face_ptr, face_verts, cell_ptr, cell_faces, cell_orient, cv_ptr, cv_verts):
    """Local stiffness/mass matrices of every cell, flattened row-major in ``cv_verts`` order.

    Returns ``(K, M, volumes, diameters)``.
    """
    nc = len(cell_ptr) - 1
    sizes = np.diff(cv_ptr)
    off = np.concatenate([[0], np.cumsum(sizes * sizes)])
    K = np.empty(off[-1])
    M = np.empty(off[-1])
    vol = np.empty(nc)
    diam = np.empty(nc)
    for c in range(nc):
        verts = cv_verts[cv_ptr[c] : cv_ptr[c + 1]]
        local = {int(v): k for k, v in enumerate(verts)}
        fs = slice(cell_ptr[c], cell_ptr[c + 1])
        cycles = [[local[int(v)] for v in face_verts[face_ptr[f] : face_ptr[f + 1]]] for f in cell_faces[fs]]
        ops = local_cell_matrices(vertices[verts], cycles, cell_orient[fs])
        K[off[c] : off[c + 1]] = ops.A.ravel()
        M[off[c] : off[c + 1]] = ops.M.ravel()
        vol[c] = ops.projector.volume
        diam[c] = ops.h
    return K, M, vol, diam


def face_matrices(vertices, face_ptr, face_verts, face_ids):
    """Local stiffness/mass matrices of the listed faces, flattened in cycle order.

    Returns ``(K, M, areas, diameters)``.
    """
    sizes = face_ptr[face_ids + 1] - face_ptr[face_ids]
    off = np.concatenate([[0], np.cumsum(sizes * sizes)])
    K = np.empty(off[-1])
    M = np.empty(off[-1])
    area = np.empty(len(face_ids))
    diam = np.empty(len(face_ids))
    for k, f in enumerate(face_ids):
        ops = local_face_matrices(vertices[face_verts[face_ptr[f] : face_ptr[f + 1]]])
        K[off[k] : off[k + 1]] = ops.A.ravel()
        M[off[k] : off[k + 1]] = ops.M.ravel()
        area[k] = ops.projector.area
        diam[k] = ops.h
    return K, M, area, diam


def imex_rhs(bt, qt, eta, theta, Mo, Mg, p, tau, coupled, out_b, out_q, out_eta, out_theta):
    """Evaluate the shifted kinetics and write the four IMEX right-hand sides.

    ``p`` packs ``(k_b, k_q, b0, q0, rho, alpha, gamma, A1, A2, B, C, D, k2,
    k3, psi_eta, d_omega * psi_theta)``. With ``coupled`` false the bulk
    traces are frozen at ``b0, q0`` and ``out_b``/``out_q`` are left alone.
    The ``theta`` right-hand side is for the shifted unknown ``theta - alpha``,
    so the equilibrium is reproduced without round-off.
    """
    k_b, k_q, b0, q0, rho, alpha, gamma, A1, A2, B, C, D, k2, k3, psi_b, psi_q = p
    ng = len(eta)
    if coupled:
        bs = bt[:ng] + b0
        qs = qt[:ng] + q0
    else:
        bs = b0
        qs = q0
    om = 1.0 - theta
    f3 = rho * (A1 * bs * om * eta - A2 * (eta * eta * eta) - B * (theta - alpha))
    f4 = rho * (
        C * qs * (1.0 + k2 * eta) * om * (1.0 - gamma * om)
        - D * (1.0 + k3 * eta) * theta * (1.0 + gamma * theta)
    )
    np.multiply(Mg, eta + tau * f3, out=out_eta)
    np.multiply(Mg, (theta - alpha) + tau * f4, out=out_theta)
    if coupled:
        np.multiply(Mo, bt + tau * (-k_b * bt), out=out_b)
        np.multiply(Mo, qt + tau * (-k_q * qt), out=out_q)
        out_b[:ng] -= (tau * psi_b) * (Mg * f3)
        out_q[:ng] -= (tau * psi_q) * (Mg * f4)
