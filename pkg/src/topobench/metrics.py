"""Structural metrics: hop distances and bisection width."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import BadParams, NoFormula
from .graph import diameter_and_mean
from .topology import Topology

DEFAULT_LINK_GBPS = 10.0


@dataclass(frozen=True)
class StructuralReport:
    """Router-level distances plus bisection estimate.

    Distances count router-to-router hops; endpoint-to-endpoint paths are
    two hops longer.  ``bisection_links`` is an edge count of the router
    graph, ``bisection_gbps`` the same cut at ``link_gbps`` per link.
    """

    kind: str
    params: dict
    n_endpoints: int
    n_routers: int
    diameter: float
    avg_distance: float
    bisection_links: int | None = None
    link_gbps: float = DEFAULT_LINK_GBPS
    connected: bool = True
    restarts: int = 0
    bisection_median: float | None = None

    @property
    def bisection_gbps(self) -> float | None:
        if self.bisection_links is None:
            return None
        return self.bisection_links * self.link_gbps

    CSV_FIELDS = ("kind", "params", "N", "diameter", "avg_distance", "bisection_links", "bisection_Gbps")

    def csv_row(self) -> dict:
        params = ";".join(f"{k}={v}" for k, v in sorted(self.params.items()) if not isinstance(v, (list, tuple)))
        return {
            "kind": self.kind,
            "params": params,
            "N": self.n_endpoints,
            "diameter": "inf" if math.isinf(self.diameter) else int(self.diameter),
            "avg_distance": "inf" if math.isinf(self.avg_distance) else f"{self.avg_distance:.6f}",
            "bisection_links": "" if self.bisection_links is None else self.bisection_links,
            "bisection_Gbps": "" if self.bisection_gbps is None else f"{self.bisection_gbps:g}",
        }

    def to_dict(self) -> dict:
        d = asdict(self)
        d["bisection_gbps"] = self.bisection_gbps
        d["distance_convention"] = "router-to-router hops"
        return d


def diameter_and_avg(topology: Topology) -> tuple[float, float]:
    """Exact diameter and mean hop distance; ``inf`` for a disconnected graph."""
    return diameter_and_mean(topology.n_routers, topology.edges)


@dataclass
class BisectionResult:
    best: int
    median: float
    cuts: list = field(default_factory=list)
    restarts: int = 0
    seed: int = 0
    best_side: np.ndarray | None = None


class _Graph:
    """Neighbour lists plus a fast adjacency lookup for KL."""

    def __init__(self, n, edges):
        self.n = n
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        self.edges = e
        src = np.concatenate([e[:, 0], e[:, 1]])
        dst = np.concatenate([e[:, 1], e[:, 0]])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        self.indptr = np.searchsorted(src, np.arange(n + 1))
        self.indices = dst
        self.keys = src * n + dst  # sorted

    def nbrs(self, v):
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def adjacent(self, us, vs):
        k = us * self.n + vs
        pos = np.searchsorted(self.keys, k)
        pos = np.minimum(pos, len(self.keys) - 1)
        return self.keys[pos] == k if len(self.keys) else np.zeros(np.shape(k), bool)

    def cut(self, s):
        return int((s[self.edges[:, 0]] != s[self.edges[:, 1]]).sum())

    def gains(self, s):
        # D_v = external - internal
        out = np.zeros(self.n, dtype=np.int64)
        np.add.at(out, self.edges[:, 0], s[self.edges[:, 1]])
        np.add.at(out, self.edges[:, 1], s[self.edges[:, 0]])
        return -s * out


def _best_pair(g, D, cand_a, cand_b):
    """Max of D_a + D_b - 2 w_ab over unlocked candidates, searched exactly.

    Candidates are scanned in decreasing D order, widening the window until
    no pair outside it can beat the best pair found inside.
    """
    oa = cand_a[np.argsort(-D[cand_a], kind="stable")]
    ob = cand_b[np.argsort(-D[cand_b], kind="stable")]
    da, db = D[oa], D[ob]
    c = 8
    while True:
        ca, cb = min(c, len(oa)), min(c, len(ob))
        A, B = oa[:ca], ob[:cb]
        gain = da[:ca, None] + db[None, :cb] - 2 * g.adjacent(A[:, None], B[None, :])
        i, j = np.unravel_index(int(np.argmax(gain)), gain.shape)
        best = int(gain[i, j])
        bound = -math.inf
        if ca < len(oa):
            bound = max(bound, da[ca] + db[0])
        if cb < len(ob):
            bound = max(bound, da[0] + db[cb])
        if best >= bound:
            return int(A[i]), int(B[j]), best
        c *= 2


def _kl(g: _Graph, s: np.ndarray) -> np.ndarray:
    """Kernighan-Lin passes until a pass yields no positive gain."""
    s = s.copy()
    while True:
        D = g.gains(s)
        locked = np.zeros(g.n, bool)
        swaps, total, best_total, best_k = [], 0, 0, 0
        steps = min(int((s > 0).sum()), int((s < 0).sum()))
        for step in range(steps):
            cand_a = np.flatnonzero((s > 0) & ~locked)
            cand_b = np.flatnonzero((s < 0) & ~locked)
            a, b, gain = _best_pair(g, D, cand_a, cand_b)
            locked[a] = locked[b] = True
            # pretend a and b are swapped
            na, nb = g.nbrs(a), g.nbrs(b)
            D[na] += 2 * s[na]
            D[nb] -= 2 * s[nb]
            swaps.append((a, b))
            total += gain
            if total > best_total:
                best_total, best_k = total, step + 1
        if best_total <= 0:
            return s
        for a, b in swaps[:best_k]:
            s[a], s[b] = -1, 1


def bisection_search(topology: Topology, restarts: int = 8, seed: int = 0) -> BisectionResult:
    """Multi-start balanced bipartition refined by Kernighan-Lin.

    Restart ``i`` draws its start from ``default_rng([seed, i])`` so a run
    with more restarts replays every start of a run with fewer.
    """
    n = topology.n_routers
    if n < 2:
        raise BadParams("bisection needs at least two routers")
    if restarts < 1:
        raise BadParams("restarts must be >= 1")
    g = _Graph(n, topology.edges)
    cuts, best, best_side = [], None, None
    half = n // 2
    for i in range(restarts):
        rng = np.random.default_rng([seed, i])
        s = np.full(n, -1, dtype=np.int64)
        s[rng.permutation(n)[:half]] = 1
        s = _kl(g, s)
        c = g.cut(s)
        cuts.append(c)
        if best is None or c < best:
            best, best_side = c, s
    return BisectionResult(best=best, median=float(np.median(cuts)), cuts=cuts,
                           restarts=restarts, seed=seed, best_side=best_side > 0)


def bisection_heuristic(topology: Topology, restarts: int = 8, seed: int = 0) -> int:
    """Smallest balanced edge cut found over ``restarts`` KL runs."""
    return bisection_search(topology, restarts, seed).best


def analytic_bisection(kind: str, N: int, k_prime: int | None = None, p: int | None = None) -> int:
    """Closed-form bisection in endpoint units for kinds that have one."""
    kind = kind.upper().replace("-", "_")
    if kind in ("HC", "FT3"):
        return N // 2
    if kind in ("T3D", "T5D"):
        if not k_prime:
            raise BadParams("torus bisection needs k'")
        return 2 * N // k_prime
    if kind in ("DF", "FBF3"):
        if p is None:
            raise BadParams(f"{kind} bisection needs p")
        return (N + 2 * p * p - 1) // 4
    if kind == "LH_HC":
        return 3 * N // 2
    raise NoFormula(f"no closed-form bisection for {kind}")


def structural_report(topology: Topology, *, restarts: int = 8, seed: int = 0,
                      link_gbps: float = DEFAULT_LINK_GBPS, bisection: bool = True) -> StructuralReport:
    diam, avg = diameter_and_avg(topology)
    res = bisection_search(topology, restarts, seed) if bisection and topology.n_routers >= 2 else None
    return StructuralReport(
        kind=topology.kind,
        params={k: v for k, v in topology.params.items()},
        n_endpoints=topology.n_endpoints,
        n_routers=topology.n_routers,
        diameter=diam,
        avg_distance=avg,
        bisection_links=None if res is None else res.best,
        link_gbps=link_gbps,
        connected=not math.isinf(diam),
        restarts=0 if res is None else restarts,
        bisection_median=None if res is None else res.median,
    )
