"""Router graph plus endpoint attachment, and its file formats."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Any

import numpy as np

from .errors import BadParams

KINDS = ("SF_MMS", "DF", "FT3", "FBF3", "T3D", "T5D", "HC", "DLN", "CUSTOM")


def _frozen(a, dtype=np.int64) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


def canonical_edges(edges) -> np.ndarray:
    """Sort each pair, drop duplicates, order lexicographically."""
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    e = np.sort(e, axis=1)
    e = np.unique(e, axis=0)
    return e


@dataclass(frozen=True, eq=False)
class Topology:
    """Immutable router-level topology.

    ``network_radix`` is k' (router-to-router ports), ``concentration`` is p
    and ``router_radix`` is k = k' + p.  ``endpoints_per_router`` says how
    many endpoints hang off each router; for every kind except FT3 this is
    p everywhere.
    """

    kind: str
    n_routers: int
    network_radix: int
    concentration: int
    edges: np.ndarray
    endpoints_per_router: np.ndarray
    labels: tuple = ()
    group_of: np.ndarray = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise BadParams(f"unknown kind {self.kind!r}")
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if len(e):
            if (e[:, 0] == e[:, 1]).any():
                raise BadParams("self-loop in edge list")
            if e.min() < 0 or e.max() >= self.n_routers:
                raise BadParams("edge endpoint outside router range")
            canon = canonical_edges(e)
            if len(canon) != len(e):
                raise BadParams("duplicate edge in edge list")
            e = canon
        object.__setattr__(self, "edges", _frozen(e))
        object.__setattr__(self, "endpoints_per_router", _frozen(self.endpoints_per_router))
        if len(self.endpoints_per_router) != self.n_routers:
            raise BadParams("endpoints_per_router must have one entry per router")
        if self.group_of is None:
            object.__setattr__(self, "group_of", np.zeros(self.n_routers, dtype=np.int64))
        object.__setattr__(self, "group_of", _frozen(self.group_of))

    @property
    def router_radix(self) -> int:
        return self.network_radix + self.concentration

    @property
    def n_endpoints(self) -> int:
        return int(self.endpoints_per_router.sum())

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        adj: list[list[int]] = [[] for _ in range(self.n_routers)]
        for u, v in self.edges.tolist():
            adj[u].append(v)
            adj[v].append(u)
        return tuple(tuple(sorted(a)) for a in adj)

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n_routers)

    @cached_property
    def _adjset(self) -> frozenset:
        return frozenset(map(tuple, self.edges.tolist()))

    def is_adjacent(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in self._adjset

    @cached_property
    def endpoint_router(self) -> np.ndarray:
        """Router of every endpoint; endpoints are numbered router by router."""
        return _frozen(np.repeat(np.arange(self.n_routers), self.endpoints_per_router))

    @cached_property
    def first_endpoint(self) -> np.ndarray:
        return _frozen(np.concatenate([[0], np.cumsum(self.endpoints_per_router)[:-1]]))

    def with_concentration(self, p: int) -> "Topology":
        """Same graph with ``p`` endpoints on every endpoint-hosting router."""
        if p < 0:
            raise BadParams("concentration must be non-negative")
        hosts = self.endpoints_per_router > 0 if self.n_endpoints else np.ones(self.n_routers, bool)
        params = dict(self.params, p=p)
        return replace(self, concentration=p, endpoints_per_router=np.where(hosts, p, 0), params=params)

    # -- serialization --

    def to_edge_list(self) -> str:
        return "".join(f"{u} {v}\n" for u, v in self.edges.tolist())

    def descriptor(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "params": _jsonable(self.params),
            "N_r": self.n_routers,
            "k_prime": self.network_radix,
            "k": self.router_radix,
            "p": self.concentration,
            "N": self.n_endpoints,
            "groups": self.group_of.tolist(),
            "endpoints_per_router": self.endpoints_per_router.tolist(),
            "edges": self.edges.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.descriptor(), sort_keys=True)

    @classmethod
    def from_descriptor(cls, d: dict) -> "Topology":
        n = int(d["N_r"])
        epr = d.get("endpoints_per_router") or [int(d["p"])] * n
        return cls(
            kind=d["kind"],
            n_routers=n,
            network_radix=int(d["k_prime"]),
            concentration=int(d["p"]),
            edges=canonical_edges(d["edges"]) if d["edges"] else np.zeros((0, 2)),
            endpoints_per_router=epr,
            group_of=d.get("groups"),
            params=dict(d.get("params", {})),
        )


def from_edge_list(text: str, *, concentration: int = 1, kind: str = "CUSTOM",
                   n_routers: int | None = None) -> Topology:
    """Parse ``u v`` lines (0-based, ``#`` comments allowed) into a Topology."""
    pairs = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        u, v = line.split()[:2]
        pairs.append((int(u), int(v)))
    edges = canonical_edges(pairs) if pairs else np.zeros((0, 2), dtype=np.int64)
    n = n_routers if n_routers is not None else (int(edges.max()) + 1 if len(edges) else 0)
    deg = np.bincount(edges.ravel(), minlength=n) if len(edges) else np.zeros(n, dtype=np.int64)
    return Topology(
        kind=kind,
        n_routers=n,
        network_radix=int(deg.max()) if n else 0,
        concentration=concentration,
        edges=edges,
        endpoints_per_router=np.full(n, concentration),
        params={"source": "edge_list", "p": concentration},
    )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj
