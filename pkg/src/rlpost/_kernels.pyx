# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot kernels. Same API as ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, tanh

cnp.import_array()


cdef inline double _sigmoid(double x) nogil:
    return 1.0 / (1.0 + exp(-x))


def gru_recurrence(double[:, ::1] xproj, double[:, ::1] u, double[::1] h0):
    cdef Py_ssize_t T = xproj.shape[0]
    cdef Py_ssize_t H = h0.shape[0]
    cdef Py_ssize_t t, i, j
    cdef double hi, z, c
    hs_arr = np.empty((T, H))
    zs_arr = np.empty((T, H))
    rs_arr = np.empty((T, H))
    cs_arr = np.empty((T, H))
    cdef double[:, ::1] hs = hs_arr
    cdef double[:, ::1] zs = zs_arr
    cdef double[:, ::1] rs = rs_arr
    cdef double[:, ::1] cs = cs_arr
    cdef double[::1] h = np.array(h0, dtype=np.float64)
    cdef double[::1] rh = np.empty(H)
    cdef double[::1] pre_z = np.empty(H)
    cdef double[::1] pre_r = np.empty(H)
    cdef double[::1] pre_c = np.empty(H)
    with nogil:
        for t in range(T):
            for j in range(H):
                pre_z[j] = xproj[t, j]
                pre_r[j] = xproj[t, H + j]
                pre_c[j] = xproj[t, 2 * H + j]
            for i in range(H):
                hi = h[i]
                for j in range(H):
                    pre_z[j] += hi * u[i, j]
                    pre_r[j] += hi * u[i, H + j]
            for j in range(H):
                rs[t, j] = _sigmoid(pre_r[j])
                zs[t, j] = _sigmoid(pre_z[j])
                rh[j] = rs[t, j] * h[j]
            for i in range(H):
                hi = rh[i]
                for j in range(H):
                    pre_c[j] += hi * u[i, 2 * H + j]
            for j in range(H):
                c = tanh(pre_c[j])
                z = zs[t, j]
                cs[t, j] = c
                h[j] = (1.0 - z) * c + z * h[j]
                hs[t, j] = h[j]
    return hs_arr, zs_arr, rs_arr, cs_arr


def gru_recurrence_backward(double[:, ::1] dhs, double[:, ::1] u, double[::1] h0,
                            double[:, ::1] hs, double[:, ::1] zs, double[:, ::1] rs,
                            double[:, ::1] cs):
    cdef Py_ssize_t T = hs.shape[0]
    cdef Py_ssize_t H = hs.shape[1]
    cdef Py_ssize_t t, i, j
    cdef double z, r, c, hp, dh, acc
    dxproj_arr = np.empty((T, 3 * H))
    du_arr = np.zeros((H, 3 * H))
    cdef double[:, ::1] dxproj = dxproj_arr
    cdef double[:, ::1] du = du_arr
    dh_next_arr = np.zeros(H)
    cdef double[::1] dh_next = dh_next_arr
    cdef double[::1] h_prev = np.empty(H)
    cdef double[::1] dhv = np.empty(H)
    cdef double[::1] dz = np.empty(H)
    cdef double[::1] dr = np.empty(H)
    cdef double[::1] dc = np.empty(H)
    cdef double[::1] da = np.empty(H)
    with nogil:
        for t in range(T - 1, -1, -1):
            for j in range(H):
                if t > 0:
                    h_prev[j] = hs[t - 1, j]
                else:
                    h_prev[j] = h0[j]
            for j in range(H):
                z = zs[t, j]
                c = cs[t, j]
                dh = dhs[t, j] + dh_next[j]
                dhv[j] = dh
                dc[j] = dh * (1.0 - z) * (1.0 - c * c)
                dz[j] = dh * (h_prev[j] - c) * z * (1.0 - z)
            for i in range(H):
                acc = 0.0
                for j in range(H):
                    acc = acc + u[i, 2 * H + j] * dc[j]
                da[i] = acc
            for i in range(H):
                r = rs[t, i]
                dr[i] = da[i] * h_prev[i] * r * (1.0 - r)
            for i in range(H):
                hp = h_prev[i]
                acc = dhv[i] * zs[t, i] + da[i] * rs[t, i]
                for j in range(H):
                    du[i, j] += hp * dz[j]
                    du[i, H + j] += hp * dr[j]
                    du[i, 2 * H + j] += rs[t, i] * hp * dc[j]
                    acc = acc + u[i, j] * dz[j] + u[i, H + j] * dr[j]
                dh_next[i] = acc
            for j in range(H):
                dxproj[t, j] = dz[j]
                dxproj[t, H + j] = dr[j]
                dxproj[t, 2 * H + j] = dc[j]
    return dxproj_arr, du_arr, dh_next_arr


def median_filter_binary(column, Py_ssize_t window):
    cdef cnp.uint8_t[::1] col = np.ascontiguousarray(column, dtype=np.uint8)
    cdef Py_ssize_t n = col.shape[0]
    cdef Py_ssize_t half = window // 2
    cdef Py_ssize_t t, k, lo, hi
    cdef long count = 0
    out_arr = np.zeros(n, dtype=np.uint8)
    if n == 0:
        return out_arr
    cdef cnp.uint8_t[::1] out = out_arr
    with nogil:
        # window for t=0 spans padded indices [-half, half]; clamp = replicate
        for k in range(-half, half + 1):
            if k < 0:
                count += col[0]
            elif k >= n:
                count += col[n - 1]
            else:
                count += col[k]
        for t in range(n):
            out[t] = 1 if count > half else 0
            lo = t - half
            hi = t + half + 1
            if lo < 0:
                count -= col[0]
            else:
                count -= col[lo]
            if hi >= n:
                count += col[n - 1]
            else:
                count += col[hi]
    return out_arr


def decode_runs(column):
    cdef cnp.uint8_t[::1] col = np.ascontiguousarray(column, dtype=np.uint8)
    cdef Py_ssize_t n = col.shape[0]
    cdef Py_ssize_t t, m = 0
    starts_arr = np.empty(n // 2 + 1, dtype=np.int64)
    ends_arr = np.empty(n // 2 + 1, dtype=np.int64)
    cdef cnp.int64_t[::1] starts = starts_arr
    cdef cnp.int64_t[::1] ends = ends_arr
    cdef int prev = 0
    with nogil:
        for t in range(n):
            if col[t] and not prev:
                starts[m] = t
            elif prev and not col[t]:
                ends[m] = t
                m += 1
            prev = col[t]
        if prev:
            ends[m] = n
            m += 1
    return starts_arr[:m].copy(), ends_arr[:m].copy()
