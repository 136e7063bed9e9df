# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the transient forward model, its adjoint, the
rectangle-window oracle and backprojection.

Chunk-level API and summation order are identical to ``_numpy_impl``; the
thread harness in forward.py drives either backend interchangeably. Inner
sums run scan-major / detection / voxel / bin so results are reproducible
run to run and bit-compatible with the serial layout.
"""

import numpy as np

from libc.math cimport ceil, exp, floor, sqrt

from ..errors import DegenerateGeometryError

NAME = "compiled"


cdef inline double _norm3(double ax, double ay, double az) nogil:
    return sqrt(ax * ax + ay * ay + az * az)


cdef inline Py_ssize_t _imax(Py_ssize_t a, Py_ssize_t b) nogil:
    return a if a > b else b


cdef inline Py_ssize_t _imin(Py_ssize_t a, Py_ssize_t b) nogil:
    return a if a < b else b


def _raise_degenerate(Py_ssize_t voxel, str what, double eps):
    raise DegenerateGeometryError(
        f"voxel {voxel} lies within {eps} m of {what}; falloff term would diverge")


cdef int _detection_geometry(const double[:, ::1] det_pos, const double[:, ::1] centers,
                             Py_ssize_t m, double eps,
                             double[::1] r_s_buf) nogil:
    """Fills r_s for detection m; returns the first degenerate voxel or -1."""
    cdef Py_ssize_t i, n = centers.shape[0]
    cdef double sx = det_pos[m, 0], sy = det_pos[m, 1], sz = det_pos[m, 2]
    cdef double r
    for i in range(n):
        r = _norm3(sx - centers[i, 0], sy - centers[i, 1], sz - centers[i, 2])
        if r < eps:
            return <int> i
        r_s_buf[i] = r
    return -1


def forward_chunk(const double[:, ::1] scan_pos, const double[:, ::1] det_pos,
                  const double[::1] src, const double[::1] det,
                  const double[:, ::1] centers, const double[::1] rho,
                  double base, double cdt, Py_ssize_t nbins,
                  double sigma_m, double inv_sigma2, double trunc_bins,
                  double eps, double[:, :, ::1] out):
    cdef Py_ssize_t S = scan_pos.shape[0]
    cdef Py_ssize_t Q = det_pos.shape[0]
    cdef Py_ssize_t N = centers.shape[0]
    cdef Py_ssize_t j, m, i, k, k0, k1
    cdef double lx, ly, lz, r_l, d, w, u, kc, legs
    cdef double[::1] r_s_buf = np.empty(N)
    cdef double[::1] src_legs = np.empty(S)
    cdef double[::1] det_legs = np.empty(Q)
    cdef int bad = -1
    cdef Py_ssize_t bad_m = -1, bad_j = -1

    with nogil:
        for j in range(S):
            src_legs[j] = _norm3(scan_pos[j, 0] - src[0], scan_pos[j, 1] - src[1],
                                 scan_pos[j, 2] - src[2])
        for m in range(Q):
            det_legs[m] = _norm3(det_pos[m, 0] - det[0], det_pos[m, 1] - det[1],
                                 det_pos[m, 2] - det[2])
        for m in range(Q):
            bad = _detection_geometry(det_pos, centers, m, eps, r_s_buf)
            if bad >= 0:
                bad_m = m
                break
            for j in range(S):
                lx = scan_pos[j, 0]
                ly = scan_pos[j, 1]
                lz = scan_pos[j, 2]
                legs = src_legs[j] + det_legs[m]
                for i in range(N):
                    r_l = _norm3(lx - centers[i, 0], ly - centers[i, 1],
                                 lz - centers[i, 2])
                    if r_l < eps:
                        bad = <int> i
                        bad_j = j
                        break
                    d = (r_l + r_s_buf[i]) + legs
                    w = rho[i] / ((r_l * r_l) * (r_s_buf[i] * r_s_buf[i]))
                    kc = (d - base) / cdt
                    if trunc_bins > 0:
                        k0 = _imax(0, <Py_ssize_t> ceil(kc - trunc_bins))
                        k1 = _imin(nbins - 1, <Py_ssize_t> floor(kc + trunc_bins))
                    else:
                        k0 = 0
                        k1 = nbins - 1
                    for k in range(k0, k1 + 1):
                        u = (base + cdt * k) - d
                        out[j, m, k] += w * exp(-(u * u) * inv_sigma2)
                if bad >= 0:
                    break
            if bad >= 0 and bad_j >= 0:
                break
    if bad >= 0:
        if bad_j >= 0:
            _raise_degenerate(bad, f"scan point {bad_j}", eps)
        _raise_degenerate(bad, f"detection point {bad_m}", eps)
    return np.asarray(out)


def rect_chunk(const double[:, ::1] scan_pos, const double[:, ::1] det_pos,
               const double[::1] src, const double[::1] det,
               const double[:, ::1] centers, const double[::1] rho,
               double cdt, Py_ssize_t nbins, double eps,
               double[:, :, ::1] out):
    cdef Py_ssize_t S = scan_pos.shape[0]
    cdef Py_ssize_t Q = det_pos.shape[0]
    cdef Py_ssize_t N = centers.shape[0]
    cdef Py_ssize_t j, m, i, k_hit
    cdef double lx, ly, lz, r_l, d, x, legs
    cdef double[::1] r_s_buf = np.empty(N)
    cdef double[::1] src_legs = np.empty(S)
    cdef double[::1] det_legs = np.empty(Q)
    cdef int bad = -1
    cdef Py_ssize_t bad_m = -1, bad_j = -1

    with nogil:
        for j in range(S):
            src_legs[j] = _norm3(scan_pos[j, 0] - src[0], scan_pos[j, 1] - src[1],
                                 scan_pos[j, 2] - src[2])
        for m in range(Q):
            det_legs[m] = _norm3(det_pos[m, 0] - det[0], det_pos[m, 1] - det[1],
                                 det_pos[m, 2] - det[2])
        for m in range(Q):
            bad = _detection_geometry(det_pos, centers, m, eps, r_s_buf)
            if bad >= 0:
                bad_m = m
                break
            for j in range(S):
                lx = scan_pos[j, 0]
                ly = scan_pos[j, 1]
                lz = scan_pos[j, 2]
                legs = src_legs[j] + det_legs[m]
                for i in range(N):
                    r_l = _norm3(lx - centers[i, 0], ly - centers[i, 1],
                                 lz - centers[i, 2])
                    if r_l < eps:
                        bad = <int> i
                        bad_j = j
                        break
                    d = (r_l + r_s_buf[i]) + legs
                    x = d / cdt
                    if x == floor(x):  # on a bin edge: the window is open
                        continue
                    k_hit = <Py_ssize_t> floor(x) + 1
                    if 0 <= k_hit < nbins:
                        out[j, m, k_hit] += rho[i] / ((r_l * r_l) * (r_s_buf[i] * r_s_buf[i]))
                if bad >= 0:
                    break
            if bad >= 0 and bad_j >= 0:
                break
    if bad >= 0:
        if bad_j >= 0:
            _raise_degenerate(bad, f"scan point {bad_j}", eps)
        _raise_degenerate(bad, f"detection point {bad_m}", eps)
    return np.asarray(out)


def grad_chunk(const double[:, ::1] scan_pos, const double[:, ::1] det_pos,
               const double[::1] src, const double[::1] det,
               const double[:, ::1] centers, const double[::1] rho,
               const double[:, :, ::1] measured, double base, double cdt,
               Py_ssize_t nbins, double sigma_m, double inv_sigma2,
               double trunc_bins, double eps, int need_pos,
               double[::1] d_rho, double[:, ::1] d_scan,
               double[:, ::1] d_det):
    cdef Py_ssize_t S = scan_pos.shape[0]
    cdef Py_ssize_t Q = det_pos.shape[0]
    cdef Py_ssize_t N = centers.shape[0]
    cdef Py_ssize_t width
    if trunc_bins > 0 and 2.0 * floor(trunc_bins) + 2.0 < <double> nbins:
        width = <Py_ssize_t> (2.0 * floor(trunc_bins) + 2.0)
    else:
        width = nbins
    cdef Py_ssize_t j, m, i, k, k0, k1, w_idx
    cdef double lx, ly, lz, r_l, r_s, d, f, w, u, kc, legs, rr
    cdef double s1, s2, coef, fall, g, loss = 0.0
    cdef double dlx, dly, dlz, dsx, dsy, dsz
    cdef double usx, usy, usz, udx, udy, udz, leg
    cdef double gl_x, gl_y, gl_z, gs_x, gs_y, gs_z
    cdef double[::1] r_s_buf = np.empty(N)
    cdef double[::1] src_legs = np.empty(S)
    cdef double[::1] det_legs = np.empty(Q)
    cdef double[::1] model = np.empty(nbins)
    cdef double[:, ::1] g_buf = np.empty((N, width))
    cdef Py_ssize_t[::1] k0_buf = np.empty(N, dtype=np.intp)
    cdef Py_ssize_t[::1] k1_buf = np.empty(N, dtype=np.intp)
    cdef int bad = -1
    cdef Py_ssize_t bad_m = -1, bad_j = -1
    cdef int bad_leg = -1

    with nogil:
        for j in range(S):
            src_legs[j] = _norm3(scan_pos[j, 0] - src[0], scan_pos[j, 1] - src[1],
                                 scan_pos[j, 2] - src[2])
            if need_pos and src_legs[j] < eps:
                bad_leg = <int> j
                break
        if bad_leg < 0:
            for m in range(Q):
                det_legs[m] = _norm3(det_pos[m, 0] - det[0], det_pos[m, 1] - det[1],
                                     det_pos[m, 2] - det[2])
                if need_pos and det_legs[m] < eps:
                    bad_leg = <int> (S + m)
                    break
        if bad_leg < 0:
            for m in range(Q):
                bad = _detection_geometry(det_pos, centers, m, eps, r_s_buf)
                if bad >= 0:
                    bad_m = m
                    break
                for j in range(S):
                    lx = scan_pos[j, 0]
                    ly = scan_pos[j, 1]
                    lz = scan_pos[j, 2]
                    legs = src_legs[j] + det_legs[m]
                    for k in range(nbins):
                        model[k] = 0.0
                    # pass 1: model row, caching the Gaussian window per voxel
                    for i in range(N):
                        r_l = _norm3(lx - centers[i, 0], ly - centers[i, 1],
                                     lz - centers[i, 2])
                        if r_l < eps:
                            bad = <int> i
                            bad_j = j
                            break
                        r_s = r_s_buf[i]
                        d = (r_l + r_s) + legs
                        w = rho[i] / ((r_l * r_l) * (r_s * r_s))
                        kc = (d - base) / cdt
                        if trunc_bins > 0:
                            k0 = _imax(0, <Py_ssize_t> ceil(kc - trunc_bins))
                            k1 = _imin(nbins - 1, <Py_ssize_t> floor(kc + trunc_bins))
                        else:
                            k0 = 0
                            k1 = nbins - 1
                        k0_buf[i] = k0
                        k1_buf[i] = k1
                        for k in range(k0, k1 + 1):
                            u = (base + cdt * k) - d
                            g = exp(-(u * u) * inv_sigma2)
                            g_buf[i, k - k0] = g
                            model[k] += w * g
                    if bad >= 0:
                        break
                    # residual and chunk loss
                    for k in range(nbins):
                        rr = model[k] - measured[j, m, k]
                        model[k] = rr
                        loss += rr * rr
                    if need_pos:
                        leg = src_legs[j]
                        usx = (lx - src[0]) / leg
                        usy = (ly - src[1]) / leg
                        usz = (lz - src[2]) / leg
                        leg = det_legs[m]
                        udx = (det_pos[m, 0] - det[0]) / leg
                        udy = (det_pos[m, 1] - det[1]) / leg
                        udz = (det_pos[m, 2] - det[2]) / leg
                        gl_x = gl_y = gl_z = 0.0
                        gs_x = gs_y = gs_z = 0.0
                    # pass 2: adjoint accumulation from the cached window
                    for i in range(N):
                        dlx = lx - centers[i, 0]
                        dly = ly - centers[i, 1]
                        dlz = lz - centers[i, 2]
                        r_l = _norm3(dlx, dly, dlz)
                        r_s = r_s_buf[i]
                        d = (r_l + r_s) + legs
                        f = 1.0 / ((r_l * r_l) * (r_s * r_s))
                        k0 = k0_buf[i]
                        k1 = k1_buf[i]
                        s1 = 0.0
                        s2 = 0.0
                        for k in range(k0, k1 + 1):
                            g = g_buf[i, k - k0] * model[k]
                            s1 += g
                            s2 += g * ((base + cdt * k) - d)
                        d_rho[i] += (2.0 * f) * s1
                        if need_pos:
                            dsx = det_pos[m, 0] - centers[i, 0]
                            dsy = det_pos[m, 1] - centers[i, 1]
                            dsz = det_pos[m, 2] - centers[i, 2]
                            coef = (4.0 * inv_sigma2) * rho[i] * f * s2
                            fall = 4.0 * rho[i] * s1 / (((r_l * r_l) * (r_l * r_l)) * (r_s * r_s))
                            gl_x += coef * (dlx / r_l + usx) - fall * dlx
                            gl_y += coef * (dly / r_l + usy) - fall * dly
                            gl_z += coef * (dlz / r_l + usz) - fall * dlz
                            fall = 4.0 * rho[i] * s1 / (((r_s * r_s) * (r_s * r_s)) * (r_l * r_l))
                            gs_x += coef * (dsx / r_s + udx) - fall * dsx
                            gs_y += coef * (dsy / r_s + udy) - fall * dsy
                            gs_z += coef * (dsz / r_s + udz) - fall * dsz
                    if need_pos:
                        d_scan[j, 0] += gl_x
                        d_scan[j, 1] += gl_y
                        d_scan[j, 2] += gl_z
                        d_det[m, 0] += gs_x
                        d_det[m, 1] += gs_y
                        d_det[m, 2] += gs_z
                if bad >= 0:
                    break
    if bad_leg >= 0:
        if bad_leg < S:
            raise DegenerateGeometryError(
                f"scan point {bad_leg} coincides with the source; position gradient undefined")
        raise DegenerateGeometryError(
            f"detection point {bad_leg - S} coincides with the detector; position gradient undefined")
    if bad >= 0:
        if bad_j >= 0:
            _raise_degenerate(bad, f"scan point {bad_j}", eps)
        _raise_degenerate(bad, f"detection point {bad_m}", eps)
    return loss


def backproject_chunk(const double[:, ::1] scan_pos, const double[:, ::1] det_pos,
                      const double[::1] src, const double[::1] det,
                      const double[:, ::1] centers, const double[:, :, ::1] measured,
                      double base, double cdt, Py_ssize_t nbins, double eps,
                      double[::1] rho_acc):
    cdef Py_ssize_t S = scan_pos.shape[0]
    cdef Py_ssize_t Q = det_pos.shape[0]
    cdef Py_ssize_t N = centers.shape[0]
    cdef Py_ssize_t j, m, i, k
    cdef double lx, ly, lz, r_l, r_s, d, legs
    cdef double[::1] r_s_buf = np.empty(N)
    cdef double[::1] src_legs = np.empty(S)
    cdef double[::1] det_legs = np.empty(Q)
    cdef int bad = -1
    cdef Py_ssize_t bad_m = -1, bad_j = -1

    with nogil:
        for j in range(S):
            src_legs[j] = _norm3(scan_pos[j, 0] - src[0], scan_pos[j, 1] - src[1],
                                 scan_pos[j, 2] - src[2])
        for m in range(Q):
            det_legs[m] = _norm3(det_pos[m, 0] - det[0], det_pos[m, 1] - det[1],
                                 det_pos[m, 2] - det[2])
        for m in range(Q):
            bad = _detection_geometry(det_pos, centers, m, eps, r_s_buf)
            if bad >= 0:
                bad_m = m
                break
            for j in range(S):
                lx = scan_pos[j, 0]
                ly = scan_pos[j, 1]
                lz = scan_pos[j, 2]
                legs = src_legs[j] + det_legs[m]
                for i in range(N):
                    r_l = _norm3(lx - centers[i, 0], ly - centers[i, 1],
                                 lz - centers[i, 2])
                    if r_l < eps:
                        bad = <int> i
                        bad_j = j
                        break
                    r_s = r_s_buf[i]
                    d = (r_l + r_s) + legs
                    # floor(x + 0.5): same nearest-bin rule as the numpy backend
                    k = <Py_ssize_t> floor((d - base) / cdt + 0.5)
                    if 0 <= k < nbins:
                        rho_acc[i] += measured[j, m, k] * ((r_l * r_l) * (r_s * r_s))
                if bad >= 0:
                    break
            if bad >= 0 and bad_j >= 0:
                break
    if bad >= 0:
        if bad_j >= 0:
            _raise_degenerate(bad, f"scan point {bad_j}", eps)
        _raise_degenerate(bad, f"detection point {bad_m}", eps)
    return np.asarray(rho_acc)
