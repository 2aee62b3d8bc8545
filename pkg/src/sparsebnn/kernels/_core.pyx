# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled batched network kernels (fused loops, no temporaries).

Signatures mirror ``_ref``; correctness is pinned to the numpy backend by
the test suite and relative speed is measured by benchmarks/bench_kernels.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, tanh
from libc.stdlib cimport free, malloc

cnp.import_array()

NAME = "compiled"

ACT_TANH = 0
ACT_SIGMOID = 1
ACT_RELU = 2

DEF PI2 = 6.283185307179586


cdef inline double _act(double z, int act) noexcept nogil:
    if act == 0:
        return tanh(z)
    elif act == 1:
        return 1.0 / (1.0 + exp(-z))
    return z if z > 0.0 else 0.0


cdef void _forward_row(const double* p, const long* sizes, int n_layers, int act,
                       const double* x, Py_ssize_t m, double* out,
                       double* cur, double* nxt) noexcept nogil:
    cdef Py_ssize_t k
    cdef int li, j, i, off, fan_in, fan_out
    cdef double acc
    cdef double* a
    cdef double* b
    cdef double* tmp
    for k in range(m):
        a = cur
        b = nxt
        a[0] = x[k]
        off = 0
        for li in range(n_layers):
            fan_in = <int> sizes[li]
            fan_out = <int> sizes[li + 1]
            for j in range(fan_out):
                acc = p[off + fan_out * fan_in + j]          # bias
                for i in range(fan_in):
                    acc += p[off + j * fan_in + i] * a[i]
                b[j] = _act(acc, act) if li < n_layers - 1 else acc
            off += fan_out * fan_in + fan_out
            tmp = a
            a = b
            b = tmp
        out[k] = a[0]


def _checked(values, sizes, x):
    values = np.ascontiguousarray(values, dtype=np.float64)
    x = np.ascontiguousarray(np.asarray(x, dtype=np.float64).ravel())
    sizes_arr = np.asarray(sizes, dtype=np.int64)
    if sizes_arr[0] != 1 or sizes_arr[-1] != 1:
        raise ValueError("batched forward expects scalar input/output layers")
    return values, sizes_arr, x


def batch_forward(values, sizes, int act, x):
    """Evaluate n parameter vectors over m scalar inputs; returns (n, m)."""
    values, sizes_arr, x = _checked(values, sizes, x)
    cdef double[:, ::1] v = values
    cdef long[::1] sz = sizes_arr
    cdef double[::1] xg = x
    cdef Py_ssize_t n = v.shape[0], m = xg.shape[0]
    cdef int n_layers = sz.shape[0] - 1
    cdef int width = int(sizes_arr.max())

    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double* cur = <double*> malloc(width * sizeof(double))
    cdef double* nxt = <double*> malloc(width * sizeof(double))
    if cur == NULL or nxt == NULL:
        free(cur); free(nxt)
        raise MemoryError()
    cdef Py_ssize_t s
    try:
        with nogil:
            for s in range(n):
                _forward_row(&v[s, 0], &sz[0], n_layers, act, &xg[0], m,
                             &o[s, 0], cur, nxt)
    finally:
        free(cur)
        free(nxt)
    return out


def batch_log_likelihood(values, sizes, int act, x, y, double noise_var):
    """Gaussian i.i.d. log-likelihood of each parameter vector; returns (n,)."""
    values, sizes_arr, x = _checked(values, sizes, x)
    y = np.ascontiguousarray(np.asarray(y, dtype=np.float64).ravel())
    cdef double[: , ::1] v = values
    cdef long[::1] sz = sizes_arr
    cdef double[::1] xg = x
    cdef double[::1] yg = y
    cdef Py_ssize_t n = v.shape[0], m = xg.shape[0]
    cdef int n_layers = sz.shape[0] - 1
    cdef int width = int(sizes_arr.max())

    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef double* cur = <double*> malloc(width * sizeof(double))
    cdef double* nxt = <double*> malloc(width * sizeof(double))
    cdef double* pred = <double*> malloc(m * sizeof(double))
    if cur == NULL or nxt == NULL or pred == NULL:
        free(cur); free(nxt); free(pred)
        raise MemoryError()
    cdef double const_term = 0.5 * m * log(PI2 * noise_var)
    cdef double ss, r
    cdef Py_ssize_t s, k
    try:
        with nogil:
            for s in range(n):
                _forward_row(&v[s, 0], &sz[0], n_layers, act, &xg[0], m,
                             pred, cur, nxt)
                ss = 0.0
                for k in range(m):
                    r = pred[k] - yg[k]
                    ss += r * r
                o[s] = -0.5 * ss / noise_var - const_term
    finally:
        free(cur)
        free(nxt)
        free(pred)
    return out
