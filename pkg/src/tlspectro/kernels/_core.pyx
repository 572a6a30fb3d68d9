# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot-loop kernels.

Same contracts as kernels._reference; see that module for docs.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def tls_susceptibility(freqs, nu, geff2, gamma):
    """Sum of defect Lorentzians chi(f) = sum_k geff2_k / (i (f - nu_k) + gamma_k / 2)."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] f = np.ascontiguousarray(freqs, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] nu_a = np.ascontiguousarray(nu, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] g2_a = np.ascontiguousarray(geff2, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ga_a = np.ascontiguousarray(gamma, dtype=np.float64)
    cdef Py_ssize_t n_f = f.shape[0]
    cdef Py_ssize_t n_t = nu_a.shape[0]
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] out = np.zeros(n_f, dtype=np.complex128)
    cdef Py_ssize_t i, k
    cdef double re, im, dr, di, mag
    for i in range(n_f):
        re = 0.0
        im = 0.0
        for k in range(n_t):
            # geff2 / (i (f - nu) + gamma/2) with denominator (dr + i di)
            dr = ga_a[k] * 0.5
            di = f[i] - nu_a[k]
            mag = dr * dr + di * di
            re += g2_a[k] * dr / mag
            im -= g2_a[k] * di / mag
        out[i] = re + 1j * im
    return out
