# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled batched 1D contraction kernels.

The single hot loop of the whole package: contracting one axis of a stack
of small tensors with a small dense matrix, out[o,i,r] = sum_k m[i,k]*u[o,k,r].
Summation runs over ascending k so results are bit-reproducible.
"""

import numpy as np

cimport cython


def contract_f8(double[:, :, ::1] u, double[:, ::1] m, double[:, :, ::1] out):
    cdef Py_ssize_t outer = u.shape[0]
    cdef Py_ssize_t n = u.shape[1]
    cdef Py_ssize_t inner = u.shape[2]
    cdef Py_ssize_t rows = m.shape[0]
    cdef Py_ssize_t o, i, k, r
    cdef double c
    for o in range(outer):
        for i in range(rows):
            for r in range(inner):
                out[o, i, r] = 0.0
            for k in range(n):
                c = m[i, k]
                for r in range(inner):
                    out[o, i, r] += c * u[o, k, r]


def contract_f4(float[:, :, ::1] u, float[:, ::1] m, float[:, :, ::1] out):
    cdef Py_ssize_t outer = u.shape[0]
    cdef Py_ssize_t n = u.shape[1]
    cdef Py_ssize_t inner = u.shape[2]
    cdef Py_ssize_t rows = m.shape[0]
    cdef Py_ssize_t o, i, k, r
    cdef float c
    for o in range(outer):
        for i in range(rows):
            for r in range(inner):
                out[o, i, r] = 0.0
            for k in range(n):
                c = m[i, k]
                for r in range(inner):
                    out[o, i, r] += c * u[o, k, r]
