"""Graph primitives shared by construction checks, metrics and resiliency.

All-pairs hop distances are computed with a bit-parallel BFS: every router
keeps a bitset of the routers it can reach, and one BFS level is the OR of
the neighbours' bitsets.  For the 8,192-router graphs this is far cheaper
than running a separate BFS per source.
"""

from __future__ import annotations

from collections import deque

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components


def neighbor_table(n: int, edges: np.ndarray) -> np.ndarray:
    """Dense ``(n, maxdeg)`` neighbour table padded with the row's own index."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    deg = np.bincount(edges.ravel(), minlength=n)
    width = int(deg.max()) if n and len(edges) else 0
    table = np.repeat(np.arange(n, dtype=np.int64)[:, None], max(width, 1), axis=1)
    src = np.concatenate([edges[:, 0], edges[:, 1]])
    dst = np.concatenate([edges[:, 1], edges[:, 0]])
    order = np.argsort(src, kind="stable")
    src, dst = src[order], dst[order]
    starts = np.searchsorted(src, np.arange(n))
    slot = np.arange(len(src)) - starts[src]
    table[src, slot] = dst
    return table


def distance_profile(n: int, edges: np.ndarray, max_levels: int | None = None) -> np.ndarray:
    """Count ordered router pairs by hop distance.

    Returns ``counts`` where ``counts[d]`` is the number of ordered pairs
    ``(u, v)``, ``u != v``, at distance ``d`` (``counts[0] == 0``).  Pairs
    never reached are ``n*(n-1) - counts.sum()``.  ``max_levels`` stops the
    BFS early; the last level then holds pairs at exactly that distance.
    """
    if n <= 1:
        return np.zeros(1, dtype=np.int64)
    table = neighbor_table(n, edges)
    words = (n + 63) // 64
    reach = np.zeros((n, words), dtype=np.uint64)
    idx = np.arange(n)
    reach[idx, idx // 64] = np.left_shift(np.uint64(1), (idx % 64).astype(np.uint64))
    counts = [0]
    reached = n
    total = n * n
    level = 0
    while reached < total:
        if max_levels is not None and level >= max_levels:
            break
        nxt = reach.copy()
        for j in range(table.shape[1]):
            np.bitwise_or(nxt, reach[table[:, j]], out=nxt)
        now = int(np.bitwise_count(nxt).sum())
        if now == reached:
            break
        counts.append(now - reached)
        reached = now
        reach = nxt
        level += 1
    return np.asarray(counts, dtype=np.int64)


def diameter_and_mean(n: int, edges: np.ndarray) -> tuple[float, float]:
    """Exact (diameter, mean distance over ordered pairs); ``inf`` if disconnected."""
    if n <= 1:
        return 0.0, 0.0
    counts = distance_profile(n, edges)
    pairs = n * (n - 1)
    if counts.sum() < pairs:
        return float("inf"), float("inf")
    diam = len(counts) - 1
    mean = float((np.arange(len(counts)) * counts).sum() / pairs)
    return float(diam), mean


def diameter_at_most(n: int, edges: np.ndarray, d: int) -> bool:
    counts = distance_profile(n, edges, max_levels=d)
    return int(counts.sum()) == n * (n - 1)


def is_connected(n: int, edges: np.ndarray) -> bool:
    if n <= 1:
        return True
    edges = np.asarray(edges).reshape(-1, 2)
    if len(edges) < n - 1:
        return False
    a = coo_matrix((np.ones(len(edges), dtype=np.int8), (edges[:, 0], edges[:, 1])), shape=(n, n))
    ncomp, _ = connected_components(a, directed=False)
    return ncomp == 1


def bfs(adj: list[list[int]] | tuple, src: int) -> list[int]:
    """Single-source hop distances, -1 for unreachable."""
    dist = [-1] * len(adj)
    dist[src] = 0
    dq = deque([src])
    while dq:
        u = dq.popleft()
        for v in adj[u]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                dq.append(v)
    return dist
