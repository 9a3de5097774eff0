# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt
from libc.stdint cimport uint64_t

cnp.import_array()

cdef uint64_t FNV_OFFSET = 0xCBF29CE484222325ULL
cdef uint64_t FNV_PRIME = 0x100000001B3ULL
cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL


cdef inline uint64_t _mix(uint64_t x) nogil:
    cdef uint64_t z = x + GOLDEN
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t _fnv(const unsigned char[:] data) nogil:
    cdef uint64_t h = FNV_OFFSET
    cdef Py_ssize_t i
    for i in range(data.shape[0]):
        h ^= data[i]
        h *= FNV_PRIME
    return h


def fnv1a64(bytes data):
    return _fnv(data)


def mix64(x):
    return _mix(<uint64_t>(x & 0xFFFFFFFFFFFFFFFF))


def key_hash(bytes key, seed):
    return _fnv(key) ^ _mix(<uint64_t>(seed & 0xFFFFFFFFFFFFFFFF))


cdef void _fill(uint64_t h, double[:] row, Py_ssize_t dim) nogil:
    cdef double scale = 1.0 / sqrt(<double>dim)
    cdef Py_ssize_t i
    cdef uint64_t z
    for i in range(dim):
        z = _mix(h + (<uint64_t>i) * GOLDEN)
        row[i] = -scale if (z >> 63) else scale


def hashed_embedding(bytes key, seed, Py_ssize_t dim):
    out = np.empty(dim, dtype=np.float64)
    cdef double[:] view = out
    cdef uint64_t h = _fnv(key) ^ _mix(<uint64_t>(seed & 0xFFFFFFFFFFFFFFFF))
    _fill(h, view, dim)
    return out


def embed_keys(list keys, seed, Py_ssize_t dim):
    cdef Py_ssize_t n = len(keys)
    out = np.empty((n, dim), dtype=np.float64)
    cdef double[:, :] view = out
    cdef uint64_t seed_mix = _mix(<uint64_t>(seed & 0xFFFFFFFFFFFFFFFF))
    cdef Py_ssize_t r
    for r in range(n):
        _fill(_fnv(<bytes>keys[r]) ^ seed_mix, view[r], dim)
    return out


def rank_hinge(pred, gold, double margin):
    cdef double[:] p = np.ascontiguousarray(pred, dtype=np.float64)
    cdef double[:] g = np.ascontiguousarray(gold, dtype=np.float64)
    cdef Py_ssize_t n = p.shape[0]
    grad = np.zeros(n, dtype=np.float64)
    cdef double[:] gv = grad
    cdef Py_ssize_t i, j
    cdef double r, h, total = 0.0
    cdef long pairs = 0
    for i in range(n):
        for j in range(n):
            if g[i] == g[j]:
                continue
            pairs += 1
            r = 1.0 if g[i] > g[j] else -1.0
            h = -r * (p[i] - p[j]) + margin
            if h > 0:
                total += h
                gv[i] -= r
                gv[j] += r
    if pairs == 0:
        return 0.0, grad
    for i in range(n):
        gv[i] /= pairs
    return total / pairs, grad
