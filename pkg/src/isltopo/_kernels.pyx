# cython: language_level=3
"""Compiled breadth-first-search kernels over CSR adjacency.

Unreachable distances and eccentricities are reported as -1; the Python
layer turns those into ``math.inf``.
"""
import numpy as np

cimport cython
from libc.stdint cimport int64_t


cdef Py_ssize_t _bfs(
    const int64_t[::1] indptr,
    const int64_t[::1] indices,
    Py_ssize_t source,
    int64_t[::1] dist,
    int64_t[::1] queue,
) noexcept nogil:
    """Fill ``dist`` from ``source``; returns the number of visited nodes."""
    cdef Py_ssize_t n = dist.shape[0]
    cdef Py_ssize_t head = 0, tail = 1, i, j, w, node
    for i in range(n):
        dist[i] = -1
    dist[source] = 0
    queue[0] = source
    while head < tail:
        node = queue[head]
        head += 1
        for j in range(indptr[node], indptr[node + 1]):
            w = indices[j]
            if dist[w] < 0:
                dist[w] = dist[node] + 1
                queue[tail] = w
                tail += 1
    return tail


def bfs_distances(const int64_t[::1] indptr, const int64_t[::1] indices, Py_ssize_t n, Py_ssize_t source):
    dist = np.empty(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] d = dist
    cdef int64_t[::1] q = queue
    with nogil:
        _bfs(indptr, indices, source, d, q)
    return dist


def eccentricities(const int64_t[::1] indptr, const int64_t[::1] indices, Py_ssize_t n):
    out = np.full(n, -1, dtype=np.int64)
    if n == 0:
        return out
    dist = np.empty(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] o = out
    cdef int64_t[::1] d = dist
    cdef int64_t[::1] q = queue
    cdef Py_ssize_t s, visited, k
    cdef int64_t far
    with nogil:
        for s in range(n):
            visited = _bfs(indptr, indices, s, d, q)
            if visited < n:
                # disconnected: every node has an unreachable partner
                for k in range(n):
                    o[k] = -1
                break
            far = d[q[visited - 1]]
            o[s] = far
    return out


def all_pairs_hops(const int64_t[::1] indptr, const int64_t[::1] indices, Py_ssize_t n):
    out = np.empty((n, n), dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    cdef int64_t[:, ::1] o = out
    cdef int64_t[::1] q = queue
    cdef Py_ssize_t s
    with nogil:
        for s in range(n):
            _bfs(indptr, indices, s, o[s], q)
    return out
