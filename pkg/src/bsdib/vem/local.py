"""Lowest-order enhanced virtual element operators on a single face or cell.

At order one the enhancement makes the L2 and H1 projections onto linears
coincide, so one projector serves both the mass and the stiffness forms.
Projections are stored in absolute coordinates:
``Pi phi_i (x) = const[i] + grads[i] . x``.
"""

from dataclasses import dataclass

import numpy as np

from ..geometry import diameter, polygon_moments, polyhedron_moments


class DegenerateElementError(ValueError):
    pass


@dataclass
class FaceProjector:
    const: np.ndarray  # (m,)
    grads: np.ndarray  # (m, 3), tangent to the face
    area: float
    normal: np.ndarray
    centroid: np.ndarray
    covariance: np.ndarray
    origin: np.ndarray
    frame: np.ndarray  # (2, 3) orthonormal in-plane axes

    @property
    def coeffs(self):
        """``(m, 3)`` coefficients ``(c0, c_xi, c_zeta)`` of each projected basis function in the local frame."""
        c0 = self.const + self.grads @ self.origin
        return np.column_stack([c0, self.grads @ self.frame.T])

    def apply(self, values):
        """Local-frame coefficients of the projection of a function with vertex ``values``."""
        return np.asarray(values) @ self.coeffs

    def evaluate(self, values, points):
        values = np.asarray(values)
        return values @ self.const + (np.atleast_2d(points) @ self.grads.T) @ values

    def integrals(self):
        """``int_F Pi phi_i`` for every vertex basis function."""
        return self.area * (self.const + self.grads @ self.centroid)


def face_projector(P):
    """Projector onto linears for the polygon with vertices ``P`` (m x 3, ordered)."""
    P = np.asarray(P, dtype=float)
    if P.shape[0] < 3:
        raise DegenerateElementError("a face needs at least three vertices")
    try:
        area, n, c, cov = polygon_moments(P)
    except ValueError as exc:
        raise DegenerateElementError(str(exc)) from None
    m = len(P)
    # int_e phi nu ds for both endpoints of edge k = P_k -> P_k+1
    w = 0.5 * np.cross(np.roll(P, -1, axis=0) - P, n)
    grads = (w + np.roll(w, 1, axis=0)) / area
    const = 1.0 / m - grads @ P.mean(axis=0)

    edges = np.roll(P, -1, axis=0) - P
    k = int(np.argmax(np.linalg.norm(edges, axis=1)))
    e1 = edges[k] / np.linalg.norm(edges[k])
    frame = np.vstack([e1, np.cross(n, e1)])
    return FaceProjector(const, grads, area, n, c, cov, P[k].copy(), frame)


@dataclass
class LocalOperators:
    projector: object
    M: np.ndarray
    A: np.ndarray
    h: float
    M_consistency: np.ndarray
    A_consistency: np.ndarray
    stabilization: np.ndarray


def _assemble(const, grads, measure, centroid, cov, X, h, mass_scale, stiff_scale):
    K = measure * grads @ grads.T
    at_c = const + grads @ centroid
    Mc = measure * np.outer(at_c, at_c) + grads @ cov @ grads.T
    D = const[None, :] + X @ grads.T
    E = np.eye(len(X)) - D
    S = E.T @ E
    S = 0.5 * (S + S.T)
    K = 0.5 * (K + K.T)
    Mc = 0.5 * (Mc + Mc.T)
    return Mc + mass_scale * S, K + stiff_scale * S, Mc, K, S


def local_face_matrices(P):
    """Stabilised mass and stiffness matrices on a polygon (h_F^2 and 1 scalings)."""
    P = np.asarray(P, dtype=float)
    pj = face_projector(P)
    h = diameter(P)
    M, A, Mc, K, S = _assemble(pj.const, pj.grads, pj.area, pj.centroid, pj.covariance, P, h, h**2, 1.0)
    return LocalOperators(pj, M, A, h, Mc, K, S)


@dataclass
class CellProjector:
    const: np.ndarray  # (n,)
    grads: np.ndarray  # (n, 3)
    volume: float
    centroid: np.ndarray
    covariance: np.ndarray

    @property
    def coeffs(self):
        """``(n, 4)`` coefficients ``(c0, cx, cy, cz)`` in absolute coordinates."""
        return np.column_stack([self.const, self.grads])

    def apply(self, values):
        return np.asarray(values) @ self.coeffs

    def evaluate(self, values, points):
        values = np.asarray(values)
        return values @ self.const + (np.atleast_2d(points) @ self.grads.T) @ values


def cell_projector(X, faces, orient, face_ops=None):
    """Projector onto linears for a polyhedron.

    ``X`` are the cell vertex coordinates, ``faces`` the local vertex cycles
    and ``orient`` the outward signs. ``face_ops`` may supply precomputed
    :class:`FaceProjector` objects in the order of ``faces``. The boundary
    integral ``int_F u n`` uses ``int_F Pi_F u``, which the enhancement makes
    exact.
    """
    X = np.asarray(X, dtype=float)
    n = len(X)
    if face_ops is None:
        face_ops = [face_projector(X[cyc]) for cyc in faces]
    closure = np.zeros(3)
    flux = np.zeros((n, 3))
    for cyc, o, pj in zip(faces, orient, face_ops):
        n_out = o * pj.normal
        closure += pj.area * n_out
        flux[cyc] += np.outer(pj.integrals(), n_out)
    scale = max(pj.area for pj in face_ops)
    if np.linalg.norm(closure) > 1e-10 * scale:
        raise DegenerateElementError("inconsistent face orientations: boundary normals do not close")
    vol, c, cov = polyhedron_moments(X, faces, orient)
    if vol <= 0:
        raise DegenerateElementError("non-positive cell volume")
    grads = flux / vol
    const = 1.0 / n - grads @ X.mean(axis=0)
    return CellProjector(const, grads, vol, c, cov)


def local_cell_matrices(X, faces, orient):
    """Stabilised mass and stiffness matrices on a polyhedron (h_E^3 and h_E scalings)."""
    X = np.asarray(X, dtype=float)
    pj = cell_projector(X, faces, orient)
    h = diameter(X)
    M, A, Mc, K, S = _assemble(pj.const, pj.grads, pj.volume, pj.centroid, pj.covariance, X, h, h**3, h)
    return LocalOperators(pj, M, A, h, Mc, K, S)
