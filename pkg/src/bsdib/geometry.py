"""Exact geometric moments of planar polygons and polyhedra.

All routines take explicit vertex coordinates and are exact for straight-sided
polytopes: polygons are split into triangle fans, polyhedra into tetrahedra
with apex at the vertex average.
"""

import numpy as np


def polygon_area_vector(P):
    """Newell area vector of a closed polygon ``P`` (m x 3); norm is the area."""
    Q = np.roll(P, -1, axis=0)
    return 0.5 * np.cross(P, Q).sum(axis=0)


def polygon_moments(P):
    """Return ``(area, unit_normal, centroid, covariance)`` of a planar polygon.

    ``covariance`` is the 3x3 second moment about the centroid,
    ``int_F (x - c)(x - c)^T``. The unit normal follows the vertex ordering.
    """
    av = polygon_area_vector(P)
    area = np.linalg.norm(av)
    if area <= 0.0:
        raise ValueError("degenerate polygon (zero area)")
    n = av / area
    p0 = P[0]
    total = 0.0
    first = np.zeros(3)
    second = np.zeros((3, 3))
    for k in range(1, len(P) - 1):
        a, b = P[k], P[k + 1]
        at = 0.5 * np.dot(n, np.cross(a - p0, b - p0))
        s = p0 + a + b
        total += at
        first += at * s / 3.0
        second += at / 12.0 * (np.outer(p0, p0) + np.outer(a, a) + np.outer(b, b) + np.outer(s, s))
    c = first / total
    cov = second - total * np.outer(c, c)
    return area, n, c, cov


def polyhedron_moments(X, faces, orient):
    """Volume, centroid and centred second moment of a polyhedron.

    ``X`` holds the cell vertex coordinates, ``faces`` a list of local vertex
    index cycles and ``orient`` the per-face sign making the cycle normal
    point outward.
    """
    apex = X.mean(axis=0)
    vol = 0.0
    first = np.zeros(3)
    second = np.zeros((3, 3))
    for cyc, o in zip(faces, orient):
        P = X[cyc]
        p0 = P[0]
        for k in range(1, len(P) - 1):
            a, b = P[k], P[k + 1]
            vt = o * np.dot(p0 - apex, np.cross(a - apex, b - apex)) / 6.0
            s = apex + p0 + a + b
            vol += vt
            first += vt * s / 4.0
            second += vt / 20.0 * (
                np.outer(apex, apex) + np.outer(p0, p0) + np.outer(a, a) + np.outer(b, b) + np.outer(s, s)
            )
    c = first / vol
    return vol, c, second - vol * np.outer(c, c)


def diameter(P):
    """Largest pairwise distance between the points of ``P``."""
    d = P[:, None, :] - P[None, :, :]
    return float(np.sqrt((d * d).sum(axis=-1).max()))
