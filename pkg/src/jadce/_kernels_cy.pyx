# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the per-iteration block operations.

Same contracts as ``_kernels_py``; each block is processed in one or two
fused passes instead of a chain of vectorized temporaries.  Blocks are
row-independent, so results do not depend on caller-side chunking.
"""

from libc.math cimport sqrt


def prox_step_dual(const double complex[:, ::1] z,
                   const double complex[:, ::1] at_lam,
                   double inv_rho, double kappa,
                   double complex[:, ::1] xi):
    cdef Py_ssize_t n = z.shape[0], m = z.shape[1], i, j
    cdef double best = 0.0, s2, nrm, f, dr, di
    cdef double complex p
    with nogil:
        for i in range(n):
            s2 = 0.0
            for j in range(m):
                p = z[i, j] + inv_rho * at_lam[i, j]
                xi[i, j] = p
                s2 += p.real * p.real + p.imag * p.imag
            nrm = sqrt(s2)
            f = 0.0 if nrm <= kappa else 1.0 - kappa / nrm
            s2 = 0.0
            for j in range(m):
                xi[i, j] = f * xi[i, j]
                dr = xi[i, j].real - z[i, j].real
                di = xi[i, j].imag - z[i, j].imag
                s2 += dr * dr + di * di
            if s2 > best:
                best = s2
    return sqrt(best)


def prox_step_point(const double complex[:, ::1] p, double kappa,
                    const double complex[:, ::1] x_prev,
                    double complex[:, ::1] xi):
    cdef Py_ssize_t n = p.shape[0], m = p.shape[1], i, j
    cdef double best = 0.0, total = 0.0, s2, nrm, f, dr, di
    with nogil:
        for i in range(n):
            s2 = 0.0
            for j in range(m):
                s2 += p[i, j].real * p[i, j].real + p[i, j].imag * p[i, j].imag
            nrm = sqrt(s2)
            f = 0.0 if nrm <= kappa else 1.0 - kappa / nrm
            s2 = 0.0
            for j in range(m):
                xi[i, j] = f * p[i, j]
                dr = xi[i, j].real - x_prev[i, j].real
                di = xi[i, j].imag - x_prev[i, j].imag
                s2 += dr * dr + di * di
            total += s2
            if s2 > best:
                best = s2
    return sqrt(best), total


def block_norms(const double complex[:, ::1] x, double[::1] out):
    cdef Py_ssize_t n = x.shape[0], m = x.shape[1], i, j
    cdef double s2
    with nogil:
        for i in range(n):
            s2 = 0.0
            for j in range(m):
                s2 += x[i, j].real * x[i, j].real + x[i, j].imag * x[i, j].imag
            out[i] = sqrt(s2)
