# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled stencil kernels: periodic forward/backward difference operators,
curvature weight and the vector shrinkage step.

Arithmetic mirrors _stencils_np exactly (same operation order) so the two
backends agree to floating-point roundoff.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()


def gradient(phi):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] p = np.ascontiguousarray(phi, dtype=np.float64)
    cdef Py_ssize_t h = p.shape[0], w = p.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=3] out = np.empty((2, h, w))
    cdef Py_ssize_t i, j, jn, inn
    for i in range(h):
        inn = i + 1 if i + 1 < h else 0
        for j in range(w):
            jn = j + 1 if j + 1 < w else 0
            out[0, i, j] = p[i, jn] - p[i, j]
            out[1, i, j] = p[inn, j] - p[i, j]
    return out


def divergence(w_field):
    cdef cnp.ndarray[cnp.float64_t, ndim=3] w = np.ascontiguousarray(w_field, dtype=np.float64)
    cdef Py_ssize_t h = w.shape[1], ww = w.shape[2]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((h, ww))
    cdef Py_ssize_t i, j, jp, ip
    for i in range(h):
        ip = i - 1 if i > 0 else h - 1
        for j in range(ww):
            jp = j - 1 if j > 0 else ww - 1
            out[i, j] = (w[0, i, j] - w[0, i, jp]) + (w[1, i, j] - w[1, ip, j])
    return out


def shrink(target, weight, double mu):
    cdef cnp.ndarray[cnp.float64_t, ndim=3] t = np.ascontiguousarray(target, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] g = np.ascontiguousarray(weight, dtype=np.float64)
    cdef Py_ssize_t h = t.shape[1], w = t.shape[2]
    cdef cnp.ndarray[cnp.float64_t, ndim=3] out = np.zeros((2, h, w))
    cdef Py_ssize_t i, j
    cdef double norm, mag, scale
    for i in range(h):
        for j in range(w):
            norm = sqrt(t[0, i, j] * t[0, i, j] + t[1, i, j] * t[1, i, j])
            if norm > 0.0:
                mag = norm - g[i, j] / mu
                if mag > 0.0:
                    scale = mag / norm
                    out[0, i, j] = t[0, i, j] * scale
                    out[1, i, j] = t[1, i, j] * scale
    return out


def curvature_weight(phi, double alpha, double beta, double eps):
    cdef cnp.ndarray[cnp.float64_t, ndim=3] grad = gradient(phi)
    cdef Py_ssize_t h = grad.shape[1], w = grad.shape[2]
    cdef cnp.ndarray[cnp.float64_t, ndim=3] unit = np.empty((2, h, w))
    cdef Py_ssize_t i, j
    cdef double norm, denom
    for i in range(h):
        for j in range(w):
            norm = sqrt(grad[0, i, j] * grad[0, i, j] + grad[1, i, j] * grad[1, i, j])
            denom = norm if norm > eps else eps
            unit[0, i, j] = grad[0, i, j] / denom
            unit[1, i, j] = grad[1, i, j] / denom
    cdef cnp.ndarray[cnp.float64_t, ndim=2] kappa = divergence(unit)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((h, w))
    for i in range(h):
        for j in range(w):
            out[i, j] = alpha + beta * fabs(kappa[i, j])
    return out
