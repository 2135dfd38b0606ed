"""Pure-Python breadth-first-search kernels; same contract as ``_kernels.pyx``."""
from collections import deque

import numpy as np


def _adjacency(indptr, indices, n):
    indptr = list(map(int, indptr))
    indices = list(map(int, indices))
    return [indices[indptr[i]:indptr[i + 1]] for i in range(n)]


def _bfs(adj, source, n):
    dist = [-1] * n
    dist[source] = 0
    queue = deque([source])
    last = source
    while queue:
        node = queue.popleft()
        last = node
        nd = dist[node] + 1
        for w in adj[node]:
            if dist[w] < 0:
                dist[w] = nd
                queue.append(w)
    return dist, last


def bfs_distances(indptr, indices, n, source):
    dist, _ = _bfs(_adjacency(indptr, indices, n), source, n)
    return np.asarray(dist, dtype=np.int64)


def eccentricities(indptr, indices, n):
    adj = _adjacency(indptr, indices, n)
    out = np.full(n, -1, dtype=np.int64)
    for s in range(n):
        dist, last = _bfs(adj, s, n)
        if -1 in dist:
            out[:] = -1
            break
        out[s] = dist[last]
    return out


def all_pairs_hops(indptr, indices, n):
    adj = _adjacency(indptr, indices, n)
    out = np.empty((n, n), dtype=np.int64)
    for s in range(n):
        out[s] = _bfs(adj, s, n)[0]
    return out
