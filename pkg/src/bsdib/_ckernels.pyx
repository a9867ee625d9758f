# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: batched VEM element matrices and the fused IMEX right-hand side.

Semantics match ``bsdib._pykernels`` to rounding.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

ctypedef cnp.float64_t f8
ctypedef cnp.int64_t i8


cdef inline double _dot(double* a, double* b) noexcept nogil:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


cdef inline void _cross(double* a, double* b, double* out) noexcept nogil:
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]


cdef double _polygon(double[:, ::1] P, int m, double* nrm, double* cen,
                     double[:, ::1] g, double* cst, double* cov) noexcept nogil:
    """Area, unit normal, centroid, projector (grads, consts) and optional covariance."""
    cdef double av[3]
    cdef double a[3]
    cdef double b[3]
    cdef double cr[3]
    cdef double s[3]
    cdef double w[3]
    cdef double wprev[3]
    cdef double vbar[3]
    cdef double area, at, total, sec[9]
    cdef int k, d, e, kn
    av[0] = 0.0; av[1] = 0.0; av[2] = 0.0
    for k in range(m):
        kn = (k + 1) % m
        for d in range(3):
            a[d] = P[k, d]
            b[d] = P[kn, d]
        _cross(a, b, cr)
        for d in range(3):
            av[d] += 0.5 * cr[d]
    area = sqrt(_dot(av, av))
    if area <= 0.0:
        return 0.0
    for d in range(3):
        nrm[d] = av[d] / area
        cen[d] = 0.0
    for d in range(9):
        sec[d] = 0.0
    total = 0.0
    for k in range(1, m - 1):
        for d in range(3):
            a[d] = P[k, d] - P[0, d]
            b[d] = P[k + 1, d] - P[0, d]
        _cross(a, b, cr)
        at = 0.5 * _dot(nrm, cr)
        for d in range(3):
            s[d] = P[0, d] + P[k, d] + P[k + 1, d]
        total += at
        for d in range(3):
            cen[d] += at * s[d] / 3.0
        if cov != NULL:
            for d in range(3):
                for e in range(3):
                    sec[3 * d + e] += at / 12.0 * (P[0, d] * P[0, e] + P[k, d] * P[k, e]
                                                   + P[k + 1, d] * P[k + 1, e] + s[d] * s[e])
    for d in range(3):
        cen[d] /= total
    if cov != NULL:
        for d in range(3):
            for e in range(3):
                cov[3 * d + e] = sec[3 * d + e] - total * cen[d] * cen[e]

    for d in range(3):
        vbar[d] = 0.0
        for k in range(m):
            vbar[d] += P[k, d]
        vbar[d] /= m
    # w for edge m-1 (closing edge), then sweep
    for d in range(3):
        a[d] = P[0, d] - P[m - 1, d]
    _cross(a, nrm, wprev)
    for d in range(3):
        wprev[d] *= 0.5
    for k in range(m):
        kn = (k + 1) % m
        for d in range(3):
            a[d] = P[kn, d] - P[k, d]
        _cross(a, nrm, w)
        for d in range(3):
            w[d] *= 0.5
            g[k, d] = (w[d] + wprev[d]) / area
            wprev[d] = w[d]
        cst[k] = 1.0 / m - _dot(&g[k, 0], vbar)
    return area


cdef double _diameter(double[:, ::1] X, int n) noexcept nogil:
    cdef double best = 0.0, dd, t
    cdef int i, j, d
    for i in range(n):
        for j in range(i + 1, n):
            dd = 0.0
            for d in range(3):
                t = X[i, d] - X[j, d]
                dd += t * t
            if dd > best:
                best = dd
    return sqrt(best)


cdef void _local(double[:, ::1] X, int n, double[:, ::1] g, double* cst, double meas,
                 double* cen, double* cov, double h_mass, double h_stiff,
                 double[:, ::1] E, double[::1] Kout, double[::1] Mout, Py_ssize_t off) noexcept nogil:
    cdef int i, j, k, d, e
    cdef double atc_i, atc_j, kij, mij, sij, q
    cdef double tmp[3]
    # E = I - D, D[k, i] = Pi phi_i (x_k)
    for k in range(n):
        for i in range(n):
            E[k, i] = (1.0 if k == i else 0.0) - (cst[i] + _dot(&X[k, 0], &g[i, 0]))
    for i in range(n):
        atc_i = cst[i] + _dot(&g[i, 0], cen)
        for d in range(3):
            tmp[d] = cov[3 * d] * g[i, 0] + cov[3 * d + 1] * g[i, 1] + cov[3 * d + 2] * g[i, 2]
        for j in range(i, n):
            atc_j = cst[j] + _dot(&g[j, 0], cen)
            kij = meas * _dot(&g[i, 0], &g[j, 0])
            mij = meas * atc_i * atc_j + _dot(tmp, &g[j, 0])
            sij = 0.0
            for k in range(n):
                sij += E[k, i] * E[k, j]
            Kout[off + i * n + j] = kij + h_stiff * sij
            Mout[off + i * n + j] = mij + h_mass * sij
            Kout[off + j * n + i] = Kout[off + i * n + j]
            Mout[off + j * n + i] = Mout[off + i * n + j]


def cell_matrices(f8[:, ::1] vertices, i8[::1] face_ptr, i8[::1] face_verts,
                  i8[::1] cell_ptr, i8[::1] cell_faces, cnp.int8_t[::1] cell_orient,
                  i8[::1] cv_ptr, i8[::1] cv_verts):
    cdef Py_ssize_t nc = cell_ptr.shape[0] - 1
    cdef Py_ssize_t nv = vertices.shape[0]
    sizes = np.diff(np.asarray(cv_ptr))
    offs = np.concatenate([[0], np.cumsum(sizes * sizes)]).astype(np.int64)
    cdef i8[::1] off = offs
    K = np.empty(offs[-1])
    M = np.empty(offs[-1])
    vol_a = np.empty(nc)
    diam_a = np.empty(nc)
    cdef double[::1] Kv = K, Mv = M, vol = vol_a, diam = diam_a
    cdef int nmax = int(sizes.max()) if nc else 1
    cdef Py_ssize_t fmax = 3
    if face_ptr.shape[0] > 1:
        fmax = int(np.diff(np.asarray(face_ptr)).max())
    cdef double[:, ::1] X = np.empty((nmax, 3))
    cdef double[:, ::1] P = np.empty((fmax, 3))
    cdef double[:, ::1] gF = np.empty((fmax, 3))
    cdef double[::1] cF = np.empty(fmax)
    cdef double[:, ::1] flux = np.empty((nmax, 3))
    cdef double[::1] cst = np.empty(nmax)
    cdef double[:, ::1] E = np.empty((nmax, nmax))
    cdef i8[::1] loc = np.full(nv, -1, dtype=np.int64)
    cdef i8[::1] fv = np.empty(fmax, dtype=np.int64)
    cdef double nrm[3]
    cdef double cen[3]
    cdef double apex[3]
    cdef double closure[3]
    cdef double first[3]
    cdef double sec[9]
    cdef double cov[9]
    cdef double a[3]
    cdef double b[3]
    cdef double p0[3]
    cdef double cr[3]
    cdef double s[3]
    cdef double vbar[3]
    cdef double area, integ, V, vt, o, h, maxarea
    cdef Py_ssize_t c, fi, f, k, m, n, d, e, v, lo
    with nogil:
        for c in range(nc):
            n = cv_ptr[c + 1] - cv_ptr[c]
            for k in range(n):
                v = cv_verts[cv_ptr[c] + k]
                loc[v] = k
                for d in range(3):
                    X[k, d] = vertices[v, d]
            for d in range(3):
                apex[d] = 0.0
                for k in range(n):
                    apex[d] += X[k, d]
                apex[d] /= n
                vbar[d] = apex[d]
                closure[d] = 0.0
                first[d] = 0.0
                for k in range(n):
                    flux[k, d] = 0.0
            for d in range(9):
                sec[d] = 0.0
            V = 0.0
            maxarea = 0.0
            for fi in range(cell_ptr[c], cell_ptr[c + 1]):
                f = cell_faces[fi]
                o = cell_orient[fi]
                m = face_ptr[f + 1] - face_ptr[f]
                for k in range(m):
                    fv[k] = face_verts[face_ptr[f] + k]
                    for d in range(3):
                        P[k, d] = vertices[fv[k], d]
                area = _polygon(P, <int>m, nrm, cen, gF, &cF[0], NULL)
                if area > maxarea:
                    maxarea = area
                for d in range(3):
                    closure[d] += o * area * nrm[d]
                for k in range(m):
                    integ = area * (cF[k] + _dot(&gF[k, 0], cen))
                    lo = loc[fv[k]]
                    for d in range(3):
                        flux[lo, d] += integ * o * nrm[d]
                for d in range(3):
                    p0[d] = P[0, d] - apex[d]
                for k in range(1, m - 1):
                    for d in range(3):
                        a[d] = P[k, d] - apex[d]
                        b[d] = P[k + 1, d] - apex[d]
                    _cross(a, b, cr)
                    vt = o * _dot(p0, cr) / 6.0
                    for d in range(3):
                        s[d] = apex[d] + P[0, d] + P[k, d] + P[k + 1, d]
                    V += vt
                    for d in range(3):
                        first[d] += vt * s[d] / 4.0
                    for d in range(3):
                        for e in range(3):
                            sec[3 * d + e] += vt / 20.0 * (apex[d] * apex[e] + P[0, d] * P[0, e]
                                                           + P[k, d] * P[k, e] + P[k + 1, d] * P[k + 1, e]
                                                           + s[d] * s[e])
            if sqrt(_dot(closure, closure)) > 1e-10 * maxarea or V <= 0.0:
                with gil:
                    raise ValueError(f"cell {c}: inconsistent face orientations or non-positive volume")
            for d in range(3):
                cen[d] = first[d] / V
            for d in range(3):
                for e in range(3):
                    cov[3 * d + e] = sec[3 * d + e] - V * cen[d] * cen[e]
            for k in range(n):
                for d in range(3):
                    flux[k, d] /= V
                cst[k] = 1.0 / n - _dot(&flux[k, 0], vbar)
            h = _diameter(X, <int>n)
            vol[c] = V
            diam[c] = h
            _local(X, <int>n, flux, &cst[0], V, cen, cov, h * h * h, h, E, Kv, Mv, off[c])
            for k in range(n):
                loc[cv_verts[cv_ptr[c] + k]] = -1
    return K, M, vol_a, diam_a


def face_matrices(f8[:, ::1] vertices, i8[::1] face_ptr, i8[::1] face_verts, i8[::1] face_ids):
    cdef Py_ssize_t nf = face_ids.shape[0]
    ids = np.asarray(face_ids)
    fp = np.asarray(face_ptr)
    sizes = fp[ids + 1] - fp[ids]
    offs = np.concatenate([[0], np.cumsum(sizes * sizes)]).astype(np.int64)
    cdef i8[::1] off = offs
    K = np.empty(offs[-1])
    M = np.empty(offs[-1])
    area_a = np.empty(nf)
    diam_a = np.empty(nf)
    cdef double[::1] Kv = K, Mv = M, ar = area_a, diam = diam_a
    cdef int mmax = int(sizes.max()) if nf else 3
    cdef double[:, ::1] P = np.empty((mmax, 3))
    cdef double[:, ::1] g = np.empty((mmax, 3))
    cdef double[::1] cst = np.empty(mmax)
    cdef double[:, ::1] E = np.empty((mmax, mmax))
    cdef double nrm[3]
    cdef double cen[3]
    cdef double cov[9]
    cdef double area, h
    cdef Py_ssize_t k, f, m, d, kk
    with nogil:
        for k in range(nf):
            f = face_ids[k]
            m = face_ptr[f + 1] - face_ptr[f]
            for kk in range(m):
                for d in range(3):
                    P[kk, d] = vertices[face_verts[face_ptr[f] + kk], d]
            area = _polygon(P, <int>m, nrm, cen, g, &cst[0], cov)
            if area <= 0.0:
                with gil:
                    raise ValueError(f"face {f}: degenerate polygon (zero area)")
            h = _diameter(P, <int>m)
            ar[k] = area
            diam[k] = h
            _local(P, <int>m, g, &cst[0], area, cen, cov, h * h, 1.0, E, Kv, Mv, off[k])
    return K, M, area_a, diam_a


def imex_rhs(f8[::1] bt, f8[::1] qt, f8[::1] eta, f8[::1] theta, f8[::1] Mo, f8[::1] Mg,
             f8[::1] p, double tau, bint coupled,
             f8[::1] out_b, f8[::1] out_q, f8[::1] out_eta, f8[::1] out_theta):
    cdef double k_b = p[0], k_q = p[1], b0 = p[2], q0 = p[3], rho = p[4], alpha = p[5]
    cdef double gamma = p[6], A1 = p[7], A2 = p[8], B = p[9], C = p[10], D = p[11]
    cdef double k2 = p[12], k3 = p[13], psi_b = p[14], psi_q = p[15]
    cdef double cb = tau * psi_b, cq = tau * psi_q
    cdef Py_ssize_t ng = eta.shape[0], nb = bt.shape[0], i
    cdef double bs, qs, et, th, om, f3, f4, x
    with nogil:
        if coupled:
            for i in range(ng, nb):
                x = bt[i]
                out_b[i] = Mo[i] * (x + tau * (-k_b * x))
                x = qt[i]
                out_q[i] = Mo[i] * (x + tau * (-k_q * x))
        for i in range(ng):
            if coupled:
                bs = bt[i] + b0
                qs = qt[i] + q0
            else:
                bs = b0
                qs = q0
            et = eta[i]
            th = theta[i]
            om = 1.0 - th
            f3 = rho * (A1 * bs * om * et - A2 * (et * et * et) - B * (th - alpha))
            f4 = rho * (C * qs * (1.0 + k2 * et) * om * (1.0 - gamma * om)
                        - D * (1.0 + k3 * et) * th * (1.0 + gamma * th))
            out_eta[i] = Mg[i] * (et + tau * f3)
            out_theta[i] = Mg[i] * ((th - alpha) + tau * f4)
            if coupled:
                x = bt[i]
                out_b[i] = Mo[i] * (x + tau * (-k_b * x)) - cb * (Mg[i] * f3)
                x = qt[i]
                out_q[i] = Mo[i] * (x + tau * (-k_q * x)) - cq * (Mg[i] * f4)
