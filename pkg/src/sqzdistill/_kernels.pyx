# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops. Signatures mirror :mod:`sqzdistill._fallback` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, exp

cnp.import_array()


def bs_table(int cutoff):
    """Balanced beam-splitter amplitudes ``coef[n, m, s]``.

    Input ``|n, m>`` goes to ``sum_s coef[n, m, s] |s>_plus |n+m-s>_minus``.
    """
    cdef int dim = cutoff + 1
    cdef int n, m, s, total
    cdef double ts, tt, norm
    coef_arr = np.zeros((dim, dim, 2 * cutoff + 1), dtype=np.float64)
    cdef double[:, :, ::1] coef = coef_arr
    coef[0, 0, 0] = 1.0
    for m in range(1, dim):
        norm = sqrt(2.0 * m)
        total = m
        for s in range(total + 1):
            tt = sqrt(<double>(total - s))
            ts = sqrt(<double>s)
            coef[0, m, s] = -tt * coef[0, m - 1, s] if s < total else 0.0
            if s > 0:
                coef[0, m, s] += ts * coef[0, m - 1, s - 1]
            coef[0, m, s] /= norm
    for n in range(1, dim):
        norm = sqrt(2.0 * n)
        for m in range(dim):
            total = n + m
            for s in range(total + 1):
                tt = sqrt(<double>(total - s))
                ts = sqrt(<double>s)
                coef[n, m, s] = tt * coef[n - 1, m, s] if s < total else 0.0
                if s > 0:
                    coef[n, m, s] += ts * coef[n - 1, m, s - 1]
                coef[n, m, s] /= norm
    return coef_arr


def gaussify_contract(cnp.ndarray rho_in, cnp.ndarray table_in, cnp.ndarray povm_in):
    """Unnormalized minus-port state after weighting the plus port by ``povm``."""
    cdef double complex[:, ::1] rho = np.ascontiguousarray(rho_in, dtype=np.complex128)
    cdef double[:, :, ::1] coef = np.ascontiguousarray(table_in, dtype=np.float64)
    cdef double[::1] povm = np.ascontiguousarray(povm_in, dtype=np.float64)
    cdef int dim = rho.shape[0]
    cdef int cutoff = dim - 1
    cdef int n_s = povm.shape[0]
    out_arr = np.zeros((dim, dim), dtype=np.complex128)
    cdef double complex[:, ::1] out = out_arr
    cdef double complex[:, ::1] g = np.zeros((dim, dim), dtype=np.complex128)
    cdef int s, t, u, n, k, m, mp, n_lo, n_hi, k_lo, k_hi
    cdef double w
    cdef double complex acc, inner, a
    for s in range(min(n_s, 2 * cutoff + 1)):
        w = povm[s]
        if w == 0.0:
            continue
        for t in range(dim):
            if s + t > 2 * cutoff:
                break
            for u in range(t, dim):
                if s + u > 2 * cutoff:
                    break
                n_lo = s + t - cutoff if s + t > cutoff else 0
                n_hi = s + t if s + t < cutoff else cutoff
                k_lo = s + u - cutoff if s + u > cutoff else 0
                k_hi = s + u if s + u < cutoff else cutoff
                acc = 0.0
                for n in range(n_lo, n_hi + 1):
                    m = s + t - n
                    a = coef[n, m, s]
                    if a == 0.0:
                        continue
                    inner = 0.0
                    for k in range(k_lo, k_hi + 1):
                        mp = s + u - k
                        inner = inner + coef[k, mp, s] * rho[n, k] * rho[m, mp]
                    acc = acc + a * inner
                out[t, u] = out[t, u] + w * acc
    for t in range(dim):
        for u in range(t + 1, dim):
            out[u, t] = out[t, u].conjugate()
    return out_arr


cdef Py_ssize_t BLOCK = 128


def husimi_batch(cnp.ndarray rho_in, cnp.ndarray alphas_in):
    """``<alpha|rho|alpha>`` for every coherent label in ``alphas`` (rho Hermitian).

    Points are processed in blocks so the innermost loop runs over
    contiguous points and vectorizes.
    """
    rho_c = np.ascontiguousarray(rho_in, dtype=np.complex128)
    cdef double[:, ::1] rr = np.ascontiguousarray(rho_c.real)
    cdef double[:, ::1] ri = np.ascontiguousarray(rho_c.imag)
    alphas_c = np.ascontiguousarray(alphas_in, dtype=np.complex128).ravel()
    cdef double[::1] ar = np.ascontiguousarray(alphas_c.real)
    cdef double[::1] ai = np.ascontiguousarray(alphas_c.imag)
    cdef int dim = rr.shape[0]
    cdef Py_ssize_t npts = ar.shape[0]
    out_arr = np.empty(npts, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double[:, ::1] vr = np.empty((dim, BLOCK), dtype=np.float64)
    cdef double[:, ::1] vi = np.empty((dim, BLOCK), dtype=np.float64)
    cdef double[::1] tr = np.empty(BLOCK, dtype=np.float64)
    cdef double[::1] ti = np.empty(BLOCK, dtype=np.float64)
    cdef double[::1] acc = np.empty(BLOCK, dtype=np.float64)
    cdef double[::1] inv_sqrt = 1.0 / np.sqrt(np.arange(1, max(dim, 2), dtype=np.float64))
    cdef Py_ssize_t start, p, nb
    cdef int mi, ni
    cdef double a, b, s, x, y, c_r, c_i, d
    for start in range(0, npts, BLOCK):
        nb = min(BLOCK, npts - start)
        for p in range(nb):
            a = ar[start + p]
            b = ai[start + p]
            vr[0, p] = exp(-0.5 * (a * a + b * b))
            vi[0, p] = 0.0
            acc[p] = 0.0
        for ni in range(1, dim):
            s = inv_sqrt[ni - 1]
            for p in range(nb):
                a = ar[start + p]
                b = ai[start + p]
                x = vr[ni - 1, p]
                y = vi[ni - 1, p]
                vr[ni, p] = (x * a - y * b) * s
                vi[ni, p] = (x * b + y * a) * s
        for mi in range(dim):
            d = rr[mi, mi]
            for p in range(nb):
                tr[p] = 0.5 * d * vr[mi, p]
                ti[p] = 0.5 * d * vi[mi, p]
            # strict upper triangle; the diagonal enters at half weight so the total doubles cleanly
            for ni in range(mi + 1, dim):
                c_r = rr[mi, ni]
                c_i = ri[mi, ni]
                for p in range(nb):
                    tr[p] += c_r * vr[ni, p] - c_i * vi[ni, p]
                    ti[p] += c_r * vi[ni, p] + c_i * vr[ni, p]
            for p in range(nb):
                acc[p] += vr[mi, p] * tr[p] + vi[mi, p] * ti[p]
        for p in range(nb):
            out[start + p] = 2.0 * acc[p]
    return out_arr
