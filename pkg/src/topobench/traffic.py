"""Synthetic traffic patterns over endpoint indices."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BadParams, BadPatternSize
from .routing import routing_tables
from .topology import Topology

PATTERNS = ("uniform", "shift", "shuffle", "bitrev", "bitcomp", "worstcase")


@dataclass
class TrafficPattern:
    """Destination rule for a set of active source endpoints.

    ``perm`` (when set) maps every active source to a fixed destination;
    otherwise destinations are drawn per packet.
    """

    name: str
    n_active: int
    active: np.ndarray
    perm: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def destinations(self, src: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        src = np.asarray(src, dtype=np.int64)
        if self.perm is not None:
            return self.perm[src]
        n = self.n_active
        if self.name == "uniform":
            # any other active endpoint, uniformly
            d = rng.integers(0, n - 1, size=len(src))
            return d + (d >= src)
        if self.name == "shift":
            half = n // 2
            up = rng.random(len(src)) < 0.5
            return src % half + np.where(up, half, 0)
        raise BadParams(f"pattern {self.name} has no destination rule")


def _bits(n: int) -> int:
    if n < 2 or n & (n - 1):
        raise BadPatternSize(f"{n} active endpoints is not a power of two")
    return n.bit_length() - 1


def bit_permutation(name: str, b: int, s):
    """Apply a bit-permutation pattern to source address(es) of ``b`` bits."""
    s = np.asarray(s, dtype=np.int64)
    mask = (1 << b) - 1
    if name == "bitcomp":
        return ~s & mask
    bit = [(s >> i) & 1 for i in range(b)]
    d = np.zeros_like(s)
    for i in range(b):
        if name == "bitrev":
            src_bit = b - i - 1
        elif name == "shuffle":
            src_bit = (i - 1) % b
        else:
            raise BadParams(f"unknown bit pattern {name}")
        d |= bit[src_bit] << i
    return d


def active_count(n_endpoints: int, pattern: str) -> int:
    """Bit patterns run on the largest power of two that fits; the rest idle."""
    if pattern in ("shuffle", "bitrev", "bitcomp"):
        return 1 << (n_endpoints.bit_length() - 1)
    return n_endpoints


def gen_traffic(pattern: str, n_active: int, rng=None) -> TrafficPattern:
    pattern = pattern.lower()
    if pattern == "uniform":
        if n_active < 2:
            raise BadParams("uniform traffic needs two endpoints")
        return TrafficPattern("uniform", n_active, np.arange(n_active))
    if pattern == "shift":
        if n_active < 2 or n_active % 2:
            raise BadPatternSize("shift traffic needs an even endpoint count")
        return TrafficPattern("shift", n_active, np.arange(n_active))
    if pattern in ("shuffle", "bitrev", "bitcomp"):
        b = _bits(n_active)
        perm = bit_permutation(pattern, b, np.arange(n_active))
        return TrafficPattern(pattern, n_active, np.arange(n_active), perm)
    raise BadParams(f"unknown traffic pattern {pattern!r}")


def worst_case_pattern(topology: Topology) -> TrafficPattern:
    """Adversarial permutation for deterministic MIN routing on a diameter-2 graph.

    For every link (x, y) and both orientations, the routers s whose MIN
    route to x runs s -> y -> x (and back x -> y -> s) exchange endpoints
    with x, one flow per endpoint in each direction, until no endpoint is
    left to pair.
    """
    tab = routing_tables(topology)
    n = topology.n_routers
    epr = topology.endpoints_per_router
    first = topology.first_endpoint
    sent = np.zeros(n, dtype=np.int64)
    recv = np.zeros(n, dtype=np.int64)
    perm = np.full(topology.n_endpoints, -1, dtype=np.int64)
    flows = []
    for x0, y0 in topology.edges.tolist():
        for x, y in ((x0, y0), (y0, x0)):
            # s -> y -> x and x -> y -> s
            cands = np.flatnonzero((tab.dist[:, x] == 2) & (tab.next_hop[:, x] == y) & (tab.next_hop[x, :] == y))
            for s in cands.tolist():
                while (sent[s] < epr[s] and recv[x] < epr[x] and sent[x] < epr[x] and recv[s] < epr[s]):
                    a, b = first[s] + sent[s], first[x] + recv[x]
                    perm[a] = b
                    flows.append((int(a), int(b)))
                    sent[s] += 1
                    recv[x] += 1
                    a, b = first[x] + sent[x], first[s] + recv[s]
                    perm[a] = b
                    flows.append((int(a), int(b)))
                    sent[x] += 1
                    recv[s] += 1
    active = np.flatnonzero(perm >= 0)
    return TrafficPattern("worstcase", topology.n_endpoints, active, perm,
                          meta={"flows": len(flows), "max_link_flows": max_link_flows(topology, flows)})


def df_worst_case_pattern(topology: Topology) -> TrafficPattern:
    """Every endpoint of group g sends to the same-offset endpoint of group g + 1."""
    if topology.kind != "DF":
        raise BadParams("group-shift worst case is defined for DF")
    per_group = int(topology.params["a"]) * topology.concentration
    g = int(topology.params["g"])
    e = np.arange(topology.n_endpoints)
    perm = (e + per_group) % (per_group * g)
    return TrafficPattern("worstcase", topology.n_endpoints, e, perm)


def max_link_flows(topology: Topology, flows) -> int:
    """Largest number of flows sharing one directed router link under MIN."""
    tab = routing_tables(topology)
    er = topology.endpoint_router
    counts: dict = {}
    for a, b in flows:
        hops = tab.path(int(er[a]), int(er[b]))
        for u, v in zip(hops, hops[1:]):
            counts[(u, v)] = counts.get((u, v), 0) + 1
    return max(counts.values(), default=0)
