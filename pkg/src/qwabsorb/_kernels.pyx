# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops; see ``_kernels_py`` for the reference semantics.

Results agree with the NumPy versions up to summation-order rounding.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()

cdef int CONVERGED = 0
cdef int MAX_STEPS = 1
cdef double TINY = 1e-150


cdef inline double _abs2(double complex z) nogil:
    return z.real * z.real + z.imag * z.imag


cdef inline double _window_sum(double[::1] p, Py_ssize_t t, Py_ssize_t window) nogil:
    cdef Py_ssize_t s
    cdef double acc = 0.0
    for s in range(t - window + 1, t + 1):
        acc += p[s]
    return acc


cdef inline bint _window_stop(double[::1] p, Py_ssize_t t, Py_ssize_t window,
                              double eps, double* acc) nogil:
    # running sum as a cheap trigger, resynced every window steps
    acc[0] += p[t]
    if t > window:
        acc[0] -= p[t - window]
    if t % window == 0:
        acc[0] = _window_sum(p, t, window)
    if t < window or acc[0] >= eps + 1e-12:
        return False
    return _window_sum(p, t, window) < eps


def graph_first_passage(const cnp.int64_t[:, ::1] neighbors,
                        const double complex[:, ::1] coin,
                        const cnp.uint8_t[::1] absorbing,
                        psi_in,
                        Py_ssize_t t_max, double eps, Py_ssize_t window,
                        bint grover):
    cdef Py_ssize_t d = neighbors.shape[0]
    cdef Py_ssize_t nv = neighbors.shape[1]
    cdef cnp.ndarray[cnp.complex128_t, ndim=2, mode="c"] a_arr = np.array(psi_in, dtype=np.complex128, order="C")
    cdef cnp.ndarray[cnp.complex128_t, ndim=2, mode="c"] b_arr = np.zeros((d, nv), dtype=np.complex128)
    cdef double complex[:, ::1] cur = a_arr
    cdef double complex[:, ::1] nxt = b_arr
    cdef double complex[:, ::1] swap
    cdef double complex[::1] tmp = np.zeros(d, dtype=np.complex128)
    p_arr = np.zeros(t_max + 1)
    cdef double[::1] p = p_arr
    cdef Py_ssize_t t, v, a, c, last = t_max
    cdef double absorbed, resid, pt, defect, scale = 2.0 / d
    cdef double complex s
    cdef int code = MAX_STEPS
    cdef double wacc = 0.0

    pt = 0.0
    resid = 0.0
    for v in range(nv):
        for a in range(d):
            if absorbing[v]:
                pt += _abs2(cur[a, v])
                cur[a, v] = 0.0
            else:
                resid += _abs2(cur[a, v])
    p[0] = pt
    absorbed = pt
    defect = fabs(absorbed + resid - 1.0)
    if resid <= eps:
        return p_arr[:1], a_arr, CONVERGED, defect

    with nogil:
        for t in range(1, t_max + 1):
            for v in range(nv):
                if grover:
                    s = 0.0
                    for a in range(d):
                        s = s + cur[a, v]
                    s = s * scale
                    for a in range(d):
                        nxt[a, neighbors[a, v]] = s - cur[a, v]
                else:
                    for a in range(d):
                        s = 0.0
                        for c in range(d):
                            s = s + coin[a, c] * cur[c, v]
                        tmp[a] = s
                    for a in range(d):
                        nxt[a, neighbors[a, v]] = tmp[a]
            swap = cur
            cur = nxt
            nxt = swap
            pt = 0.0
            resid = 0.0
            for v in range(nv):
                if absorbing[v]:
                    for a in range(d):
                        pt += _abs2(cur[a, v])
                        cur[a, v] = 0.0
                else:
                    for a in range(d):
                        resid += _abs2(cur[a, v])
            p[t] = pt
            absorbed += pt
            if fabs(absorbed + resid - 1.0) > defect:
                defect = fabs(absorbed + resid - 1.0)
            if resid <= eps or _window_stop(p, t, window, eps, &wacc):
                last = t
                code = CONVERGED
                break

    out = np.asarray(cur).copy()
    return p_arr[:last + 1], out, code, defect


def line_first_passage(Py_ssize_t m, double a, double b, Py_ssize_t t_max,
                       double eps, Py_ssize_t window):
    cdef Py_ssize_t off = t_max + 1
    cdef Py_ssize_t size = m + off + 1
    cdef Py_ssize_t hi = size - 1
    right_arr = np.zeros(size)
    left_arr = np.zeros(size)
    p_arr = np.zeros(t_max + 1)
    cdef double[::1] right = right_arr
    cdef double[::1] left = left_arr
    cdef double[::1] p = p_arr
    cdef Py_ssize_t t, j, lo = off, lowest = off, last = t_max
    cdef double r, l, carry_r, pt, resid, absorbed = 0.0, defect = 0.0
    cdef int code = MAX_STEPS
    cdef double wacc = 0.0
    right[off] = 1.0

    with nogil:
        for t in range(1, t_max + 1):
            lo -= 1
            if lo < lowest:
                lowest = lo
            # sweep upward: L moves down one index, R up one index
            carry_r = 0.0
            for j in range(lo + 1, hi + 1):
                r = right[j]
                l = left[j]
                left[j - 1] = b * r - a * l
                right[j] = carry_r
                carry_r = a * r + b * l
            left[hi] = 0.0
            pt = right[hi] * right[hi] + left[hi] * left[hi]
            right[hi] = 0.0
            p[t] = pt
            absorbed += pt
            while lo < hi and fabs(right[lo]) < TINY and fabs(left[lo]) < TINY:
                right[lo] = 0.0
                left[lo] = 0.0
                lo += 1
            resid = 0.0
            for j in range(lo, hi):
                resid += right[j] * right[j] + left[j] * left[j]
            if fabs(absorbed + resid - 1.0) > defect:
                defect = fabs(absorbed + resid - 1.0)
            if resid <= eps or _window_stop(p, t, window, eps, &wacc):
                last = t
                code = CONVERGED
                break

    return p_arr[:last + 1], right_arr, left_arr, lowest, code, defect


def chain_first_passage(const cnp.int64_t[:, ::1] targets, const double[:, ::1] coeffs,
                        const cnp.uint8_t[::1] absorbing, x_in,
                        Py_ssize_t t_max, double eps, Py_ssize_t window):
    cdef Py_ssize_t k = targets.shape[0]
    cdef Py_ssize_t ns = targets.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] x_arr = np.array(x_in, dtype=np.float64, order="C")
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] y_arr = np.zeros(ns)
    cdef double[::1] x = x_arr
    cdef double[::1] y = y_arr
    cdef double[::1] swap
    p_arr = np.zeros(t_max + 1)
    cdef double[::1] p = p_arr
    cdef Py_ssize_t t, j, r, tg, last = t_max
    cdef double pt, resid, absorbed, defect, xj
    cdef int code = MAX_STEPS
    cdef double wacc = 0.0

    pt = 0.0
    resid = 0.0
    for j in range(ns):
        if absorbing[j]:
            pt += x[j] * x[j]
            x[j] = 0.0
        else:
            resid += x[j] * x[j]
    p[0] = pt
    absorbed = pt
    defect = fabs(absorbed + resid - 1.0)
    if resid <= eps:
        return p_arr[:1], x_arr, CONVERGED, defect

    with nogil:
        for t in range(1, t_max + 1):
            for j in range(ns):
                y[j] = 0.0
            for j in range(ns):
                xj = x[j]
                if xj == 0.0:
                    continue
                for r in range(k):
                    tg = targets[r, j]
                    if tg >= 0:
                        y[tg] += coeffs[r, j] * xj
            swap = x
            x = y
            y = swap
            pt = 0.0
            resid = 0.0
            for j in range(ns):
                if absorbing[j]:
                    pt += x[j] * x[j]
                    x[j] = 0.0
                else:
                    resid += x[j] * x[j]
            p[t] = pt
            absorbed += pt
            if fabs(absorbed + resid - 1.0) > defect:
                defect = fabs(absorbed + resid - 1.0)
            if resid <= eps or _window_stop(p, t, window, eps, &wacc):
                last = t
                code = CONVERGED
                break

    return p_arr[:last + 1], np.asarray(x).copy(), code, defect


def consume_labels(const cnp.int64_t[::1] labels, cnp.int64_t diff0,
                   cnp.int64_t state, cnp.int64_t steps,
                   cnp.int64_t[::1] times, Py_ssize_t done):
    cdef Py_ssize_t total = times.shape[0]
    cdef Py_ssize_t j, nlab = labels.shape[0]
    cdef cnp.int64_t one = 1
    with nogil:
        for j in range(nlab):
            if done >= total:
                break
            state ^= one << labels[j]
            steps += 1
            if state == 0:
                times[done] = steps
                done += 1
                steps = 0
                state = diff0
    return state, steps, done
