"""Rack layout, cable accounting, and the cost and power models.

Racks are 1 x 1 x 2 m.  Cables inside a rack are electric and 1 m long on
average; cables between racks are optic with length = Manhattan rack
distance + 2 m of overhead.  Endpoint-to-router links are charged as 1 m
electric cables.  Prices come from linear fits in $/(Gb/s) per metre
(cables) and $ per port (routers); power counts SerDes only.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import BadParams, RadixTooSmall, UnsupportedGrouping
from .field import factor_prime_power
from .topogen import build_mms, build_reference
from .topology import Topology

OVERHEAD_M = 2.0
INTRA_RACK_M = 1.0


@dataclass(frozen=True)
class PricePreset:
    name: str
    electric: tuple[float, float]  # slope [$/Gb/s/m], intercept [$/Gb/s]
    optic: tuple[float, float]
    bandwidth_gbps: float
    router: tuple[float, float]  # slope [$/port], intercept [$]
    lanes_per_port: int = 4
    watts_per_lane: float = 0.7


PRESETS = {
    "fdr10": PricePreset("fdr10", (0.4079, 0.5771), (0.0919, 2.7452), 40.0, (350.4, -892.3)),
}


def load_preset(name: str = "fdr10", config: str | Path | dict | None = None) -> PricePreset:
    """Named preset, optionally overridden by a JSON file or dict."""
    if name not in PRESETS:
        raise BadParams(f"unknown preset {name!r}; have {sorted(PRESETS)}")
    base = PRESETS[name]
    if config is None:
        return base
    over = config if isinstance(config, dict) else json.loads(Path(config).read_text())
    over = dict(over)
    unknown = set(over) - set(asdict(base))
    if unknown:
        raise BadParams(f"unknown price fields {sorted(unknown)}")
    for key in ("electric", "optic", "router"):
        if key in over:
            over[key] = tuple(float(x) for x in over[key])
    return replace(base, **over)


def cable_cost(length_m: float, medium: str, bandwidth_gbps: float, preset: PricePreset = PRESETS["fdr10"]):
    if np.any(np.asarray(length_m) < 0):
        raise BadParams("cable length must be non-negative")
    if medium not in ("electric", "optic"):
        raise BadParams(f"medium must be electric or optic, not {medium!r}")
    slope, icpt = preset.electric if medium == "electric" else preset.optic
    return (slope * np.asarray(length_m, dtype=float) + icpt) * bandwidth_gbps


def router_cost(k: int, preset: PricePreset = PRESETS["fdr10"]) -> float:
    slope, icpt = preset.router
    c = slope * k + icpt
    if c <= 0:
        raise RadixTooSmall(f"router cost fit is {c:.2f} at k={k}")
    return c


@dataclass(frozen=True)
class Rack:
    id: int
    row: int
    col: int
    routers: tuple[int, ...]


@dataclass
class LayoutPlan:
    """Rack placement plus one cable per router link and per endpoint link.

    ``cable_ends`` holds router pairs for network cables and
    ``(endpoint, router)`` for endpoint cables (``cable_endpoint`` marks them).
    """

    kind: str
    racks: list[Rack]
    cable_ends: np.ndarray
    cable_length: np.ndarray
    cable_optic: np.ndarray
    cable_endpoint: np.ndarray
    grid: tuple[int, int, int]  # x rows, y cols, z leftover racks
    rack_dims: tuple[float, float, float] = (1.0, 1.0, 2.0)
    notes: list[str] = field(default_factory=list)

    @property
    def n_electric(self) -> int:
        return int((~self.cable_optic).sum())

    @property
    def n_optic(self) -> int:
        return int(self.cable_optic.sum())

    def cables(self):
        for (a, b), length, optic, ep in zip(self.cable_ends.tolist(), self.cable_length.tolist(),
                                             self.cable_optic.tolist(), self.cable_endpoint.tolist()):
            yield {"endpoints": (a, b), "length_m": length, "medium": "optic" if optic else "electric",
                   "endpoint_link": ep}


def rack_grid(n_racks: int) -> tuple[int, int, int]:
    """Near-square x*y grid with x*y <= n_racks; z = leftover racks on one side."""
    if n_racks < 1:
        raise BadParams("need at least one rack")
    x = math.isqrt(n_racks)
    y = n_racks // x
    return x, y, n_racks - x * y


def _positions(n_racks: int) -> tuple[np.ndarray, np.ndarray, tuple[int, int, int]]:
    x, y, z = rack_grid(n_racks)
    i = np.arange(n_racks)
    # row-major over the x*y block, leftovers fill an extra row
    row = np.where(i < x * y, i // y, x)
    col = np.where(i < x * y, i % y, i - x * y)
    return row, col, (x, y, z)


def _rack_assignment(topology: Topology) -> np.ndarray:
    kind = topology.kind
    if kind == "SF_MMS":
        q = int(topology.params["q"])
        if factor_prime_power(q)[1] != 1:
            raise UnsupportedGrouping(f"subgroup pairing into racks is defined for prime q only (q={q})")
        # routers (0, x, .) and (1, x, .) share rack x
        return np.asarray(topology.group_of)
    _, rack = np.unique(np.asarray(topology.group_of), return_inverse=True)
    return rack


def build_layout(topology: Topology) -> LayoutPlan:
    """Place racks on a near-square grid in group order and list every cable.

    Tori are folded, so all their cables are 1 m electric.  Fat-tree routers
    sit in one central row and every router-to-router cable is a 1 m optic
    link.  For the remaining kinds each router group is one rack.
    """
    rack_of = _rack_assignment(topology)
    n_racks = int(rack_of.max()) + 1 if len(rack_of) else 1
    row, col, grid = _positions(n_racks)
    members = [[] for _ in range(n_racks)]
    for r, g in enumerate(rack_of.tolist()):
        members[g].append(r)
    racks = [Rack(i, int(row[i]), int(col[i]), tuple(m)) for i, m in enumerate(members)]

    e = topology.edges
    ra, rb = rack_of[e[:, 0]], rack_of[e[:, 1]]
    inter = ra != rb
    dist = np.abs(row[ra] - row[rb]) + np.abs(col[ra] - col[rb])
    notes = []
    if topology.kind in ("T3D", "T5D"):
        length = np.full(len(e), INTRA_RACK_M)
        optic = np.zeros(len(e), dtype=bool)
        notes.append("folded torus: all cables electric, 1 m")
    elif topology.kind == "FT3":
        length = np.full(len(e), INTRA_RACK_M)
        optic = np.ones(len(e), dtype=bool)
        notes.append("fat tree: routers in a central row, router cables optic, 1 m")
    else:
        length = np.where(inter, dist + OVERHEAD_M, INTRA_RACK_M).astype(float)
        optic = inter

    er = topology.endpoint_router
    ep_ends = np.stack([np.arange(len(er)), er], axis=1) if len(er) else np.zeros((0, 2), dtype=np.int64)
    return LayoutPlan(
        kind=topology.kind,
        racks=racks,
        cable_ends=np.concatenate([e, ep_ends]).astype(np.int64),
        cable_length=np.concatenate([length, np.full(len(er), INTRA_RACK_M)]),
        cable_optic=np.concatenate([optic, np.zeros(len(er), dtype=bool)]),
        cable_endpoint=np.concatenate([np.zeros(len(e), dtype=bool), np.ones(len(er), dtype=bool)]),
        grid=grid,
        notes=notes,
    )


@dataclass
class PowerReport:
    n_routers: int
    radix: int
    n_endpoints: int
    power_total: float
    power_per_endpoint: float


def power_model(topology: Topology, radix: int | None = None,
                preset: PricePreset = PRESETS["fdr10"]) -> PowerReport:
    """SerDes power: every port has ``lanes_per_port`` lanes at ``watts_per_lane``."""
    k = topology.router_radix if radix is None else radix
    total = topology.n_routers * k * preset.lanes_per_port * preset.watts_per_lane
    n = topology.n_endpoints
    return PowerReport(topology.n_routers, k, n, total, total / n if n else math.inf)


@dataclass
class CostReport:
    n_routers: int
    radix: int
    n_endpoints: int
    router_cost_total: float
    electric_cost: float
    optic_cost: float
    electric_cables: int
    fiber_cables: int
    endpoint_cables: int

    @property
    def cable_cost_total(self) -> float:
        return self.electric_cost + self.optic_cost

    @property
    def total(self) -> float:
        return self.router_cost_total + self.cable_cost_total

    @property
    def cost_per_endpoint(self) -> float:
        return self.total / self.n_endpoints if self.n_endpoints else math.inf


def cost_model(topology: Topology, layout: LayoutPlan | None = None, radix: int | None = None,
               preset: PricePreset = PRESETS["fdr10"], *, endpoint_links: bool = True) -> CostReport:
    """Routers at ``router_cost(k)`` each plus every cable in the layout."""
    layout = build_layout(topology) if layout is None else layout
    k = topology.router_radix if radix is None else radix
    keep = np.ones(len(layout.cable_length), dtype=bool) if endpoint_links else ~layout.cable_endpoint
    opt = layout.cable_optic & keep
    ele = ~layout.cable_optic & keep
    bw = preset.bandwidth_gbps
    ecost = float(cable_cost(layout.cable_length[ele], "electric", bw, preset).sum())
    ocost = float(cable_cost(layout.cable_length[opt], "optic", bw, preset).sum())
    return CostReport(
        n_routers=topology.n_routers,
        radix=k,
        n_endpoints=topology.n_endpoints,
        router_cost_total=router_cost(k, preset) * topology.n_routers,
        electric_cost=ecost,
        optic_cost=ocost,
        electric_cables=int(ele.sum()),
        fiber_cables=int(opt.sum()),
        endpoint_cables=int((layout.cable_endpoint & keep).sum()),
    )


REPORT_FIELDS = ("topology", "N", "N_r", "k", "electric_cables", "fiber_cables", "cost_per_node",
                 "power_per_node")


def report_row(topology: Topology, *, radix: int | None = None, preset: PricePreset = PRESETS["fdr10"],
               name: str | None = None, endpoint_links: bool = True) -> dict:
    """One cost/power comparison row; ``k_structural`` is always k' + p."""
    cost = cost_model(topology, radix=radix, preset=preset, endpoint_links=endpoint_links)
    power = power_model(topology, radix=radix, preset=preset)
    return {
        "topology": name or topology.kind,
        "N": topology.n_endpoints,
        "N_r": topology.n_routers,
        "k": cost.radix,
        "electric_cables": cost.electric_cables,
        "fiber_cables": cost.fiber_cables,
        "cost_per_node": round(cost.cost_per_endpoint, 2),
        "power_per_node": round(power.power_per_endpoint, 3),
        "k_structural": topology.router_radix,
        "router_cost_total": round(cost.router_cost_total, 2),
        "electric_cost": round(cost.electric_cost, 2),
        "optic_cost": round(cost.optic_cost, 2),
        "endpoint_cables": cost.endpoint_cables,
        "preset": preset.name,
    }


def comparison_rows(preset: PricePreset = PRESETS["fdr10"]) -> list[dict]:
    """SF q=19 and the same-radix DF (a=22, h=2, p=11), both charged at k=43."""
    sf = build_mms(19)
    df = build_reference("DF", p=11, h=2, a=22)
    return [
        report_row(sf, radix=43, preset=preset, name="SF"),
        report_row(df, radix=43, preset=preset, name="DF"),
    ]
