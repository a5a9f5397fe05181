"""MIN, VAL and UGAL path selection plus hop-indexed VC assignment."""

from __future__ import annotations

import json
import weakref
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import shortest_path

from .errors import BadParams, NoPath, RouteTooLong
from .topology import Topology

MAX_ADAPTIVE_HOPS = 4


@dataclass(frozen=True)
class Route:
    hops: tuple
    vcs: tuple = ()
    algorithm: str = "MIN"
    intermediate: int | None = None

    @property
    def length(self) -> int:
        return max(len(self.hops) - 1, 0)

    def to_json(self) -> str:
        return json.dumps({"hops": list(self.hops), "vcs": list(self.vcs), "algorithm": self.algorithm,
                           "intermediate": self.intermediate})


class QueueView:
    """Output-queue occupancy seen by a routing decision.

    ``occupancy`` maps ``(router, next_router)`` to per-VC flit counts, or is
    a callable with the same signature returning the summed count.  With
    ``scope="local"`` only ports of ``router`` may be queried.
    """

    def __init__(self, scope: str, occupancy: Mapping | Callable | None = None, router: int | None = None):
        if scope not in ("local", "global"):
            raise BadParams("queue scope must be 'local' or 'global'")
        self.scope = scope
        self.router = router
        self._occ = occupancy if occupancy is not None else {}

    def port(self, router: int, next_router: int) -> int:
        if self.scope == "local" and self.router is not None and router != self.router:
            raise BadParams("local queue view only covers its own router")
        if callable(self._occ):
            return int(self._occ(router, next_router))
        v = self._occ.get((router, next_router), 0)
        return int(sum(v)) if isinstance(v, (list, tuple, np.ndarray)) else int(v)


class RoutingTables:
    """All-pairs hop distances and deterministic next hops.

    The next hop from ``s`` toward ``d`` is the lowest-ID neighbour of ``s``
    one step closer to ``d``; in a diameter-2 graph this is the lowest-ID
    common neighbour.
    """

    def __init__(self, topology: Topology):
        n = topology.n_routers
        e = topology.edges
        a = coo_matrix((np.ones(2 * len(e)), (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])), shape=(n, n))
        dist = shortest_path(a.tocsr(), method="D", unweighted=True)
        self.connected = bool(np.isfinite(dist).all())
        dist[~np.isfinite(dist)] = -1
        self.dist = dist.astype(np.int16)
        nxt = np.full((n, n), -1, dtype=np.int32)
        for s, nb in enumerate(topology.neighbors):
            if not nb:
                continue
            nb = np.asarray(nb)
            closer = self.dist[nb, :] == (self.dist[s, :] - 1)[None, :]
            closer &= self.dist[s, :][None, :] > 0
            has = closer.any(axis=0)
            nxt[s, has] = nb[np.argmax(closer[:, has], axis=0)]
        self.next_hop = nxt
        self.n = n

    def path(self, s: int, d: int) -> tuple:
        if s == d:
            return (s,)
        if self.dist[s, d] < 0:
            raise NoPath(f"no path from router {s} to router {d}")
        hops = [s]
        while s != d:
            s = int(self.next_hop[s, d])
            hops.append(s)
        return tuple(hops)


_TABLES: "weakref.WeakKeyDictionary[Topology, RoutingTables]" = weakref.WeakKeyDictionary()


def routing_tables(topology: Topology) -> RoutingTables:
    t = _TABLES.get(topology)
    if t is None:
        t = _TABLES[topology] = RoutingTables(topology)
    return t


def assign_vcs(route: Route, max_hops: int = MAX_ADAPTIVE_HOPS) -> Route:
    """VC ``i`` on hop ``i``."""
    if route.length > max_hops:
        raise RouteTooLong(f"route of {route.length} hops exceeds {max_hops} virtual channels")
    return Route(route.hops, tuple(range(route.length)), route.algorithm, route.intermediate)


def min_route(topology: Topology, src: int, dst: int) -> Route:
    hops = routing_tables(topology).path(src, dst)
    return Route(hops, tuple(range(len(hops) - 1)), "MIN")


def _pick_intermediate(n: int, src: int, dst: int, rng) -> int:
    # uniform over the n - 2 (or n - 1 if src == dst) other routers
    skip = sorted({src, dst})
    r = int(rng.integers(n - len(skip)))
    for s in skip:
        if r >= s:
            r += 1
    return r


def valiant_route(topology: Topology, src: int, dst: int, rng, *, cap_three: bool = False,
                  max_tries: int = 64) -> Route:
    """MIN to a random intermediate, then MIN to the destination.

    ``cap_three`` redraws the intermediate until the route has at most three
    hops (falls back to MIN after ``max_tries``).
    """
    n = topology.n_routers
    if n < 3:
        raise BadParams("VAL needs at least three routers")
    tables = routing_tables(topology)
    for _ in range(max_tries if cap_three else 1):
        r = _pick_intermediate(n, src, dst, rng)
        hops = tables.path(src, r) + tables.path(r, dst)[1:]
        if not cap_three or len(hops) - 1 <= 3:
            return Route(hops, tuple(range(len(hops) - 1)), "VAL", r)
    return min_route(topology, src, dst)


def _route_score(route: Route, queues: QueueView) -> int:
    if route.length == 0:
        return 0
    if queues.scope == "global":
        return sum(queues.port(u, v) for u, v in zip(route.hops, route.hops[1:]))
    return route.length * queues.port(route.hops[0], route.hops[1])


def ugal_select(topology: Topology, src: int, dst: int, queues: QueueView, candidates: int = 4, rng=None,
                *, cap_three: bool = False) -> Route:
    """Pick MIN or one of ``candidates`` VAL routes by queue-weighted score.

    Global view: sum of output-queue occupancy along the route.  Local view:
    hop count times the occupancy of the first output port at ``src``.  Ties
    prefer MIN, then fewer hops, then the earlier candidate.
    """
    name = "UGAL_G" if queues.scope == "global" else "UGAL_L"
    best = min_route(topology, src, dst)
    if src == dst:
        return Route(best.hops, best.vcs, name, best.intermediate)
    if rng is None:
        rng = np.random.default_rng(0)
    best_key = (_route_score(best, queues), 0, best.length, -1)
    for i in range(candidates):
        r = valiant_route(topology, src, dst, rng, cap_three=cap_three)
        key = (_route_score(r, queues), 1, r.length, i)
        if key < best_key:
            best, best_key = r, key
    return Route(best.hops, best.vcs, name, best.intermediate)


def fat_tree_route(topology: Topology, src: int, dst: int, up_load: Callable[[int, int], int]) -> Route:
    """Adaptive up-routing to the nearest common ancestor, deterministic down.

    At each upward step the least-loaded upward port (``up_load(router,
    next_router)``) is taken, lowest index on ties.  Router IDs follow the
    generator: edge ``w0 + m*pod``, aggregation ``m^2 + x + m*pod``, core
    ``2m^2 + x + m*y``.
    """
    m = int(topology.params["m"])
    m2 = m * m
    if src == dst:
        return Route((src,), (), "ANCA")
    if not (src < m2 and dst < m2):
        raise BadParams("fat-tree routes run between edge routers")
    ps, pd = src // m, dst // m
    aggs = [m2 + x + m * ps for x in range(m)]
    x = min(range(m), key=lambda i: (up_load(src, aggs[i]), i))
    a_up = aggs[x]
    if ps == pd:
        hops = (src, a_up, dst)
    else:
        cores = [2 * m2 + x + m * y for y in range(m)]
        y = min(range(m), key=lambda i: (up_load(a_up, cores[i]), i))
        hops = (src, a_up, cores[y], m2 + x + m * pd, dst)
    return Route(hops, tuple(range(len(hops) - 1)), "ANCA")


def validate_route(topology: Topology, route: Route) -> bool:
    return all(topology.is_adjacent(u, v) for u, v in zip(route.hops, route.hops[1:]))


def channel_dependencies(routes: Sequence[Route]) -> set:
    """Edges ``((u, v, vc), (v, w, vc'))`` between consecutive channel uses."""
    deps = set()
    for r in routes:
        chans = [(u, v, c) for (u, v), c in zip(zip(r.hops, r.hops[1:]), r.vcs)]
        deps.update(zip(chans, chans[1:]))
    return deps


def is_acyclic(deps: set) -> bool:
    """Kahn's algorithm over the channel dependency graph."""
    succ: dict = {}
    indeg: dict = {}
    for a, b in deps:
        succ.setdefault(a, []).append(b)
        indeg[b] = indeg.get(b, 0) + 1
        indeg.setdefault(a, 0)
    ready = [v for v, d in indeg.items() if d == 0]
    seen = 0
    while ready:
        v = ready.pop()
        seen += 1
        for w in succ.get(v, ()):
            indeg[w] -= 1
            if indeg[w] == 0:
                ready.append(w)
    return seen == len(indeg)
