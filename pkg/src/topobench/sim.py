"""Cycle-based flit-level simulation of input-queued routers.

Every router input port holds one FIFO per virtual channel; packets are a
single flit.  A flit that reaches an input buffer at cycle ``a`` may win
switch allocation from cycle ``a + va_delay + sa_delay`` on, then spends
``crossbar_delay + channel_latency`` cycles before it lands in the next
buffer.  Upstream output ports track downstream space with credits that
come back ``credit_delay`` cycles after a flit leaves its buffer.

The state is kept in flat numpy arrays so one cycle costs a fixed number of
vectorised operations regardless of how many flits move.

Timeline of one run: adaptive warmup (windows of ``warmup_window`` cycles
until the mean latency of two consecutive windows agrees within 2 %),
a measurement window, then a drain with packet generation switched off.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Iterable

import numpy as np

from .errors import BadParams, Deadlock, NonSteady, RouteTooLong
from .routing import routing_tables
from .topology import Topology
from .traffic import TrafficPattern, active_count, df_worst_case_pattern, gen_traffic, worst_case_pattern

ROUTINGS = ("MIN", "VAL", "UGAL_L", "UGAL_G", "ANCA")


@dataclass
class SimConfig:
    topology: Topology
    routing: str = "MIN"
    injection_rate: float = 0.1
    buffer_flits_per_port: int = 64
    credit_delay: int = 2
    channel_latency: int = 1
    sa_delay: int = 1
    va_delay: int = 1
    crossbar_delay: int = 1
    internal_speedup: int = 2
    io_speedup: int = 1
    vc_count: int | None = None
    ugal_candidates: int = 4
    val_cap_three: bool = False
    queue_signal: str = "credits"
    warmup_cycles: int = 1000
    warmup_window: int = 500
    warmup_cap: int = 100_000
    measure_cycles: int = 2000
    drain_cap: int = 20_000
    watchdog_cycles: int = 10_000
    strict_steady: bool = False
    seed: int = 0

    def __post_init__(self):
        self.routing = self.routing.upper().replace("-", "_")
        if self.routing not in ROUTINGS:
            raise BadParams(f"unknown routing {self.routing!r}")
        if self.routing == "ANCA" and self.topology.kind != "FT3":
            raise BadParams("ANCA routing needs a fat tree")
        if not 0 < self.injection_rate <= 1:
            raise BadParams("injection_rate must lie in (0, 1]")
        for name in ("channel_latency", "sa_delay", "va_delay", "crossbar_delay",
                     "internal_speedup", "io_speedup", "buffer_flits_per_port"):
            if getattr(self, name) < 1:
                raise BadParams(f"{name} must be >= 1")
        if self.credit_delay < 0:
            raise BadParams("credit_delay must be >= 0")
        if self.queue_signal not in ("output", "credits"):
            raise BadParams("queue_signal must be 'output' or 'credits'")
        if self.vc_count is None:
            self.vc_count = default_vc_count(self.topology, self.routing)
        if self.buffer_flits_per_port < self.vc_count:
            raise BadParams("buffer too small for the VC count")

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "topology"}
        d["topology"] = {"kind": self.topology.kind, "params": _plain(self.topology.params)}
        return d


def default_vc_count(topology: Topology, routing: str) -> int:
    """One VC per hop of the longest route the algorithm can produce."""
    if routing == "ANCA":
        return 4
    diam = int(routing_tables(topology).dist.max())
    return diam if routing == "MIN" else 2 * diam


def zero_load_latency(hops: int, cfg: SimConfig) -> int:
    """Injection channel, then ``hops + 1`` router traversals each followed by a channel."""
    per_router = cfg.va_delay + cfg.sa_delay + cfg.crossbar_delay + cfg.channel_latency
    return cfg.channel_latency + (hops + 1) * per_router


@dataclass
class SimStats:
    offered: float
    offered_measured: float
    accepted: float
    mean_latency: float
    p50_latency: float
    p99_latency: float
    min_latency: float
    packets_measured: int
    saturated: bool
    non_steady: bool
    drained: bool
    warmup_cycles: int
    measure_cycles: int
    max_channel_load: float
    channel_load_hist: list = field(default_factory=list)
    routing: str = ""
    seed: int = 0

    CSV_FIELDS = ("load", "accepted", "mean_latency", "p99_latency", "saturated_flag")

    def csv_row(self) -> dict:
        return {
            "load": f"{self.offered:g}",
            "accepted": f"{self.accepted:.6f}",
            "mean_latency": f"{self.mean_latency:.4f}",
            "p99_latency": f"{self.p99_latency:g}",
            "saturated_flag": int(self.saturated),
        }

    def to_dict(self) -> dict:
        return asdict(self)


class _Events:
    """Bucketed future events keyed by cycle."""

    def __init__(self):
        self.buckets: dict[int, list] = {}

    def add(self, t, *arrays):
        if len(arrays[0]):
            self.buckets.setdefault(t, []).append(arrays)

    def pop(self, t):
        items = self.buckets.pop(t, None)
        if not items:
            return None
        if len(items) == 1:
            return items[0]
        return tuple(np.concatenate(col) for col in zip(*items))

    def pending(self):
        return self.buckets


def _group_rank(keys: np.ndarray) -> np.ndarray:
    """Rank of each element within its run of equal (sorted) keys."""
    n = len(keys)
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    start = np.r_[True, keys[1:] != keys[:-1]]
    idx = np.arange(n)
    first = np.maximum.accumulate(np.where(start, idx, 0))
    return idx - first


class Simulator:
    """Single simulation instance; drive with :meth:`run` or :meth:`step`."""

    def __init__(self, cfg: SimConfig, pattern: TrafficPattern):
        self.cfg = cfg
        self.pattern = pattern
        topo = cfg.topology
        self.topo = topo
        ss = np.random.SeedSequence(cfg.seed)
        traffic_ss, route_ss = ss.spawn(2)
        self.rng_traffic = np.random.default_rng(traffic_ss)
        self.rng_route = np.random.default_rng(route_ss)

        self.tables = routing_tables(topo)
        n = topo.n_routers
        e = topo.edges
        src = np.r_[e[:, 0], e[:, 1]]
        dst = np.r_[e[:, 1], e[:, 0]]
        keys = src * n + dst
        order = np.argsort(keys)
        self.chan_keys = keys[order]
        self.chan_src = src[order]
        self.chan_dst = dst[order]
        self.C = C = len(keys)
        self.N = N = topo.n_endpoints
        self.ep_router = np.asarray(topo.endpoint_router)
        self.V = V = int(cfg.vc_count)
        self.P = P = C + N

        cap_net = cfg.buffer_flits_per_port // V
        self.cap_net = cap_net
        Q = P * V
        self.qcap = np.full(Q, cap_net, dtype=np.int64)
        self.qbuf = np.zeros((Q, cap_net), dtype=np.int64)
        self.qhead = np.zeros(Q, dtype=np.int64)
        self.qlen = np.zeros(Q, dtype=np.int64)
        self.credits = np.full((C, V), cap_net, dtype=np.int64)
        # injection ports are split into VCs like network ports; the source
        # fills whichever VC has the most free slots
        self.inj_credits = np.full((N, V), cap_net, dtype=np.int64)
        self.in_ptr = np.zeros(P, dtype=np.int64)
        self.out_ptr = np.zeros(C + N, dtype=np.int64)
        # the crossbar delivers up to internal_speedup flits per cycle into an
        # output buffer; the channel behind it sends one flit per cycle
        # (io_speedup for ejection).  chan_free is the next idle send slot.
        self.out_cap = np.full(C + N, cfg.internal_speedup, dtype=np.int64)
        self.out_rate = np.r_[np.ones(C, dtype=np.int64), np.full(N, cfg.io_speedup, dtype=np.int64)]
        self.chan_free = np.zeros(C + N, dtype=np.int64)

        # packet pool; every live packet holds a buffer credit, so the pool never overflows
        pool = int(self.qcap.sum()) + N * cfg.io_speedup + 16
        self.max_len = self.V + 1
        self.p_src = np.zeros(pool, dtype=np.int64)
        self.p_dst = np.zeros(pool, dtype=np.int64)
        self.p_gen = np.zeros(pool, dtype=np.int64)
        self.p_hop = np.zeros(pool, dtype=np.int64)
        self.p_ready = np.zeros(pool, dtype=np.int64)
        self.p_out = np.zeros((pool, self.max_len), dtype=np.int64)
        self.free = np.arange(pool - 1, -1, -1, dtype=np.int64)
        self.nfree = pool

        # infinite source queues as growable rings
        self.active = np.asarray(pattern.active, dtype=np.int64)
        self.src_cap = 64
        self.src_gen = np.zeros((N, self.src_cap), dtype=np.int64)
        self.src_dst = np.zeros((N, self.src_cap), dtype=np.int64)
        self.src_head = np.zeros(N, dtype=np.int64)
        self.src_len = np.zeros(N, dtype=np.int64)

        self.arrivals = _Events()
        self.credit_ev = _Events()
        self.src_credit_ev = _Events()

        self.t = 0
        self.generating = True
        self.idle = 0
        self.window = None  # (start, end) of measurement by generation time
        self.ejected_in_window = 0
        self.measured_generated = 0
        self.measured_ejected = 0
        self.total_generated = 0
        self.total_ejected = 0
        self.measured_lat: list[np.ndarray] = []
        self.chan_count = np.zeros(C, dtype=np.int64)
        self.win_lat_sum = 0
        self.win_lat_n = 0

        if cfg.routing == "ANCA":
            self._init_fat_tree()

    # -- helpers --

    def channel(self, u, v):
        return np.searchsorted(self.chan_keys, np.asarray(u) * self.topo.n_routers + np.asarray(v))

    def port_occupancy(self) -> np.ndarray:
        """Queue signal per network output port used by adaptive routing.

        ``"output"``: flits waiting in the router's output buffer for the
        channel.  ``"credits"``: flits committed to the downstream input
        buffer (sent or in flight), summed over VCs.
        """
        if self.cfg.queue_signal == "credits":
            return (self.cap_net - self.credits).sum(axis=1)
        return np.maximum(self.chan_free[: self.C] - self.t, 0)

    def _init_fat_tree(self):
        m = int(self.topo.params["m"])
        m2 = m * m
        edge = np.arange(m2)
        x = np.arange(m)
        self.ft_m = m
        self.ft_up1 = self.channel(edge[:, None], m2 + x[None, :] + m * (edge[:, None] // m))
        agg = np.arange(m2)  # aggregation index x + m*pod
        self.ft_up2 = self.channel(m2 + agg[:, None], 2 * m2 + (agg % m)[:, None] + m * x[None, :])

    # -- routing at the source router --

    def _paths(self, s, d):
        """MIN router paths, padded with -1."""
        D = int(self.tables.dist.max())
        L = self.tables.dist[s, d].astype(np.int64)
        out = np.full((len(s), D + 1), -1, dtype=np.int64)
        out[:, 0] = s
        cur = s.copy()
        for i in range(1, D + 1):
            step = i <= L
            cur = np.where(step, self.tables.next_hop[cur, d], cur)
            out[step, i] = cur[step]
        return out, L

    def _val_paths(self, s, d, r):
        a, la = self._paths(s, r)
        b, lb = self._paths(r, d)
        width = a.shape[1] + b.shape[1] - 1
        out = np.full((len(s), width), -1, dtype=np.int64)
        out[:, : a.shape[1]] = a
        rows = np.arange(len(s))
        for j in range(1, b.shape[1]):
            ok = j <= lb
            out[rows[ok], la[ok] + j] = b[ok, j]
        return out, la + lb

    def _intermediates(self, s, d, k):
        n = self.topo.n_routers
        lo, hi = np.minimum(s, d), np.maximum(s, d)
        same = s == d
        r = self.rng_route.integers(0, n - 2 + same[:, None], size=(len(s), k))
        r = r + (r >= lo[:, None])
        r = r + ((r >= hi[:, None]) & ~same[:, None])
        return r

    def _path_channels(self, path, length):
        """Router path -> output-port sequence (channels then the ejection port)."""
        B = len(path)
        out = np.full((B, self.max_len), -1, dtype=np.int64)
        for i in range(path.shape[1] - 1):
            ok = i < length
            if ok.any():
                out[ok, i] = self.channel(path[ok, i], path[ok, i + 1])
        return out

    def _route(self, pids, t):
        cfg = self.cfg
        src_ep, dst_ep = self.p_src[pids], self.p_dst[pids]
        s, d = self.ep_router[src_ep], self.ep_router[dst_ep]
        mode = cfg.routing
        if mode == "ANCA":
            path, length = self._fat_tree_paths(s, d)
        elif mode == "MIN":
            path, length = self._paths(s, d)
        elif mode == "VAL":
            path, length = self._val_choice(s, d)
        else:
            path, length = self._ugal_choice(s, d, mode)
        if length.max(initial=0) > self.V:
            raise RouteTooLong(f"route of {int(length.max())} hops exceeds {self.V} virtual channels")
        outs = self._path_channels(path, length)
        outs[np.arange(len(pids)), length] = self.C + dst_ep
        self.p_out[pids] = outs
        self.p_hop[pids] = 0

    def _val_choice(self, s, d):
        r = self._intermediates(s, d, 1)[:, 0]
        path, length = self._val_paths(s, d, r)
        if self.cfg.val_cap_three:
            for _ in range(63):
                bad = length > 3
                if not bad.any():
                    break
                r2 = self._intermediates(s[bad], d[bad], 1)[:, 0]
                p2, l2 = self._val_paths(s[bad], d[bad], r2)
                path[bad], length[bad] = p2, l2
            bad = length > 3
            if bad.any():
                p2, l2 = self._paths(s[bad], d[bad])
                path[bad] = -1
                path[bad, : p2.shape[1]] = p2
                length[bad] = l2
        return path, length

    def _ugal_choice(self, s, d, mode):
        K = self.cfg.ugal_candidates
        occ = self.port_occupancy()
        mp, ml = self._paths(s, d)
        inter = self._intermediates(s, d, K)
        cands = [(mp, ml)] + [self._val_paths(s, d, inter[:, i]) for i in range(K)]
        if self.cfg.val_cap_three:
            cands = [cands[0]] + [(p, np.where(l > 3, 10**6, l)) for p, l in cands[1:]]
        width = max(p.shape[1] for p, _ in cands)
        scores, lengths = [], []
        for p, l in cands:
            lc = np.minimum(l, width - 1)
            ch = self._path_channels(p, lc)
            if mode == "UGAL_G":
                sc = np.where(ch >= 0, occ[np.maximum(ch, 0)], 0).sum(axis=1)
            else:
                sc = lc * np.where(lc > 0, occ[np.maximum(ch[:, 0], 0)], 0)
            sc = np.where(l >= 10**6, 10**9, sc)
            scores.append(sc)
            lengths.append(lc)
        # ties: MIN first, then fewer hops, then generation order
        S = np.stack(scores, axis=1)
        L = np.stack(lengths, axis=1)
        is_val = np.r_[0, np.ones(K, dtype=np.int64)][None, :]
        idx = np.arange(K + 1)[None, :]
        key = ((S * 2 + is_val) * (width + 1) + L) * (K + 1) + idx
        pick = np.argmin(key, axis=1)
        path = np.full((len(s), width), -1, dtype=np.int64)
        length = np.zeros(len(s), dtype=np.int64)
        for i, (p, l) in enumerate(cands):
            sel = pick == i
            path[sel, : p.shape[1]] = p[sel]
            length[sel] = l[sel]
        return path, length

    def _fat_tree_paths(self, s, d):
        m = self.ft_m
        m2 = m * m
        occ = self.port_occupancy()
        B = len(s)
        x = np.argmin(occ[self.ft_up1[s]], axis=1)
        ps, pd = s // m, d // m
        agg = m2 + x + m * ps
        y = np.argmin(occ[self.ft_up2[agg - m2]], axis=1)
        core = 2 * m2 + x + m * y
        path = np.full((B, 5), -1, dtype=np.int64)
        path[:, 0] = s
        same_router = s == d
        same_pod = (ps == pd) & ~same_router
        far = ps != pd
        path[same_pod, 1] = agg[same_pod]
        path[same_pod, 2] = d[same_pod]
        path[far, 1] = agg[far]
        path[far, 2] = core[far]
        path[far, 3] = (m2 + x + m * pd)[far]
        path[far, 4] = d[far]
        length = np.where(same_router, 0, np.where(same_pod, 2, 4))
        return path, length

    # -- cycle --

    def _alloc_packets(self, k):
        if k > self.nfree:
            raise RuntimeError("packet pool exhausted")
        pids = self.free[self.nfree - k:self.nfree].copy()
        self.nfree -= k
        return pids

    def _release(self, pids):
        k = len(pids)
        self.free[self.nfree:self.nfree + k] = pids
        self.nfree += k

    def _grow_sources(self):
        old = self.src_cap
        new = old * 2
        idx = (self.src_head[:, None] + np.arange(old)[None, :]) % old
        rows = np.arange(self.N)[:, None]
        g = np.zeros((self.N, new), dtype=np.int64)
        dd = np.zeros((self.N, new), dtype=np.int64)
        g[:, :old] = self.src_gen[rows, idx]
        dd[:, :old] = self.src_dst[rows, idx]
        self.src_gen, self.src_dst, self.src_cap = g, dd, new
        self.src_head[:] = 0

    def _push(self, q, pids):
        order = np.argsort(q, kind="stable")
        q, pids = q[order], pids[order]
        rank = _group_rank(q)
        pos = (self.qhead[q] + self.qlen[q] + rank) % self.qcap[q]
        self.qbuf[q, pos] = pids
        np.add.at(self.qlen, q, 1)

    def step(self):
        cfg, t = self.cfg, self.t
        C, V = self.C, self.V
        moved = 0

        ev = self.arrivals.pop(t)
        if ev is not None:
            self._push(*ev)
        ev = self.credit_ev.pop(t)
        if ev is not None:
            np.add.at(self.credits, (ev[0], ev[1]), 1)
        ev = self.src_credit_ev.pop(t)
        if ev is not None:
            np.add.at(self.inj_credits, (ev[0], ev[1]), 1)

        # Bernoulli generation into the source queues
        if self.generating:
            hit = self.rng_traffic.random(len(self.active)) < cfg.injection_rate
            srcs = self.active[hit]
            if len(srcs):
                if (self.src_len[srcs] >= self.src_cap).any():
                    self._grow_sources()
                dsts = self.pattern.destinations(srcs, self.rng_traffic)
                pos = (self.src_head[srcs] + self.src_len[srcs]) % self.src_cap
                self.src_gen[srcs, pos] = t
                self.src_dst[srcs, pos] = dsts
                self.src_len[srcs] += 1
                self.total_generated += len(srcs)
                if self.window and self.window[0] <= t < self.window[1]:
                    self.measured_generated += len(srcs)

        # sources push into their injection channel
        for _ in range(cfg.io_speedup):
            ready = np.flatnonzero((self.src_len > 0) & (self.inj_credits.max(axis=1) > 0))
            if not len(ready):
                break
            pids = self._alloc_packets(len(ready))
            h = self.src_head[ready]
            self.p_src[pids] = ready
            self.p_dst[pids] = self.src_dst[ready, h]
            self.p_gen[pids] = self.src_gen[ready, h]
            self.p_hop[pids] = -1
            arrive = t + cfg.channel_latency
            self.p_ready[pids] = arrive + cfg.va_delay + cfg.sa_delay
            self.src_head[ready] = (h + 1) % self.src_cap
            self.src_len[ready] -= 1
            ivc = np.argmax(self.inj_credits[ready], axis=1)
            self.inj_credits[ready, ivc] -= 1
            self.arrivals.add(arrive, (C + ready) * V + ivc, pids)
            moved += len(ready)

        # switch allocation
        act = np.flatnonzero(self.qlen > 0)
        if len(act):
            heads = self.qbuf[act, self.qhead[act]]
            rd = self.p_ready[heads] <= t
            act, heads = act[rd], heads[rd]
        if len(act):
            unrouted = self.p_hop[heads] < 0
            if unrouted.any():
                self._route(heads[unrouted], t)
            hop = self.p_hop[heads]
            out = self.p_out[heads, hop]
            net = out < C
            ok = ~net | (self.credits[np.where(net, out, 0), np.minimum(hop, V - 1)] > 0)
            act, heads, hop, out = act[ok], heads[ok], hop[ok], out[ok]
        if len(act):
            ip, vc = act // V, act % V
            # input stage: up to internal_speedup VCs per input port, round-robin
            prio = (vc - self.in_ptr[ip]) % V
            o = np.lexsort((prio, ip))
            keep = o[_group_rank(ip[o]) < cfg.internal_speedup]
            act, heads, hop, out, ip, vc = act[keep], heads[keep], hop[keep], out[keep], ip[keep], vc[keep]
            # output stage: one grant per port (io_speedup for ejection), round-robin over inputs
            prio = (ip - self.out_ptr[out]) % self.P
            # a (port, VC) pair takes no more flits than it has credits
            ovc = out * V + np.minimum(hop, V - 1)
            o = np.lexsort((prio, ovc))
            room = np.where(out[o] < C, self.credits[np.minimum(out[o], C - 1), np.minimum(hop[o], V - 1)], 1 << 30)
            o = o[_group_rank(ovc[o]) < room]
            o = o[np.lexsort((prio[o], out[o]))]
            rank = _group_rank(out[o])
            sel = rank < self.out_cap[out[o]]
            keep, rank = o[sel], rank[sel]
            act, heads, hop, out, ip, vc = act[keep], heads[keep], hop[keep], out[keep], ip[keep], vc[keep]
            self._grant(t, act, heads, hop, out, ip, vc, rank)
            moved += len(act)

        if moved:
            self.idle = 0
        elif self.qlen.any():
            self.idle += 1
            if self.idle > cfg.watchdog_cycles:
                raise Deadlock(f"no flit moved for {self.idle} cycles at cycle {t}")
        self.t += 1

    def _grant(self, t, act, heads, hop, out, ip, vc, rank):
        cfg, C, V = self.cfg, self.C, self.V
        self.qhead[act] = (self.qhead[act] + 1) % self.qcap[act]
        self.qlen[act] -= 1
        self.in_ptr[ip] = (vc + 1) % V
        self.out_ptr[out] = (ip + 1) % self.P

        # credits back upstream
        net_in = ip < C
        back = t + cfg.credit_delay
        if cfg.credit_delay == 0:
            np.add.at(self.credits, (ip[net_in], vc[net_in]), 1)
            np.add.at(self.inj_credits, (ip[~net_in] - C, vc[~net_in]), 1)
        else:
            self.credit_ev.add(back, ip[net_in], vc[net_in])
            self.src_credit_ev.add(back, ip[~net_in] - C, vc[~net_in])

        base = np.maximum(t + cfg.crossbar_delay, self.chan_free[out])
        depart = base + rank // self.out_rate[out]
        self.chan_free[out] = depart + 1  # rank order within a port makes the last write the latest
        land_all = depart + cfg.channel_latency
        net = out < C
        if net.any():
            o, h, p = out[net], hop[net], heads[net]
            np.subtract.at(self.credits, (o, h), 1)
            self.p_hop[p] = h + 1
            land = land_all[net]
            self.p_ready[p] = land + cfg.va_delay + cfg.sa_delay
            for tl in np.unique(land):
                m = land == tl
                self.arrivals.add(int(tl), o[m] * V + h[m], p[m])
            if self.window:
                dep = depart[net]
                inw = (dep >= self.window[0]) & (dep < self.window[1])
                np.add.at(self.chan_count, o[inw], 1)
        if (~net).any():
            p = heads[~net]
            land = land_all[~net]
            gen = self.p_gen[p]
            lat = land - gen
            self.win_lat_sum += int(lat.sum())
            self.win_lat_n += len(lat)
            if self.window:
                w0, w1 = self.window
                self.ejected_in_window += int(((land >= w0) & (land < w1)).sum())
                m = (gen >= w0) & (gen < w1)
                if m.any():
                    self.measured_lat.append(lat[m])
                    self.measured_ejected += int(m.sum())
            self.total_ejected += len(p)
            self._release(p)

    # -- bookkeeping used by tests --

    def buffered(self) -> int:
        return int(self.qlen.sum())

    def backlog(self) -> int:
        return int(self.src_len.sum())

    def in_flight(self) -> int:
        return sum(len(a[1]) for items in self.arrivals.pending().values() for a in items)

    def drain_all(self, cap: int = 100_000) -> bool:
        """Stop generation and step until no packet is left anywhere."""
        self.generating = False
        for _ in range(cap):
            if self.total_ejected == self.total_generated:
                return True
            self.step()
        return self.total_ejected == self.total_generated

    def credit_conservation_ok(self) -> bool:
        """credits + in flight + buffered + credits returning == capacity per (channel, VC)."""
        C, V = self.C, self.V
        total = self.credits.copy()
        total += self.qlen[: C * V].reshape(C, V)
        for items in self.arrivals.pending().values():
            for q, _ in items:
                q = q[q < C * V]
                np.add.at(total, (q // V, q % V), 1)
        for items in self.credit_ev.pending().values():
            for c, v in items:
                np.add.at(total, (c, v), 1)
        return bool((total == self.cap_net).all()) and bool((self.qlen <= self.qcap).all())

    # -- phases --

    def run(self) -> SimStats:
        cfg = self.cfg
        W = cfg.warmup_window
        prev_lat = None
        backlog_hist = [self.backlog()]
        saturated_early = False
        converged = False
        while self.t < cfg.warmup_cap:
            self.win_lat_sum = self.win_lat_n = 0
            for _ in range(W):
                self.step()
            lat = self.win_lat_sum / self.win_lat_n if self.win_lat_n else math.inf
            backlog_hist.append(self.backlog())
            if self.t >= cfg.warmup_cycles and prev_lat is not None and math.isfinite(lat):
                if abs(lat - prev_lat) <= 0.02 * prev_lat:
                    converged = True
                    break
            if len(backlog_hist) >= 4:
                b = backlog_hist[-4:]
                grew = all(x < y for x, y in zip(b, b[1:]))
                offered = cfg.injection_rate * len(self.active) * 3 * W
                if grew and b[-1] - b[0] > 0.01 * offered:
                    saturated_early = True
                    break
            prev_lat = lat
        non_steady = not converged
        if non_steady and cfg.strict_steady:
            raise NonSteady(f"warmup did not converge within {cfg.warmup_cap} cycles")
        warm = self.t
        self.window = (warm, warm + cfg.measure_cycles)
        for _ in range(cfg.measure_cycles):
            self.step()
        self.generating = False
        if not saturated_early:
            for _ in range(cfg.drain_cap):
                if self.measured_ejected >= self.measured_generated:
                    break
                self.step()
        drained = self.measured_ejected >= self.measured_generated
        return self._stats(warm, non_steady, saturated_early, drained)

    def _stats(self, warm, non_steady, saturated_early, drained) -> SimStats:
        cfg = self.cfg
        T = cfg.measure_cycles
        na = len(self.active)
        lat = np.concatenate(self.measured_lat) if self.measured_lat else np.zeros(0)
        accepted = self.ejected_in_window / (na * T)
        offered_measured = self.measured_generated / (na * T)
        util = self.chan_count / T
        hist, _ = np.histogram(util, bins=10, range=(0.0, 1.0))
        saturated = saturated_early or accepted < 0.99 * offered_measured or not drained
        return SimStats(
            offered=cfg.injection_rate,
            offered_measured=offered_measured,
            accepted=accepted,
            mean_latency=float(lat.mean()) if len(lat) else math.inf,
            p50_latency=float(np.percentile(lat, 50)) if len(lat) else math.inf,
            p99_latency=float(np.percentile(lat, 99)) if len(lat) else math.inf,
            min_latency=float(lat.min()) if len(lat) else math.inf,
            packets_measured=int(len(lat)),
            saturated=bool(saturated),
            non_steady=bool(non_steady),
            drained=bool(drained),
            warmup_cycles=int(warm),
            measure_cycles=T,
            max_channel_load=float(util.max()) if len(util) else 0.0,
            channel_load_hist=hist.tolist(),
            routing=cfg.routing,
            seed=cfg.seed,
        )


def make_pattern(topology: Topology, pattern: str, rng=None) -> TrafficPattern:
    pattern = pattern.lower()
    if pattern == "worstcase":
        return df_worst_case_pattern(topology) if topology.kind == "DF" else worst_case_pattern(topology)
    return gen_traffic(pattern, active_count(topology.n_endpoints, pattern), rng)


def run_sim(config: SimConfig, pattern: str | TrafficPattern = "uniform") -> SimStats:
    pat = make_pattern(config.topology, pattern) if isinstance(pattern, str) else pattern
    return Simulator(config, pat).run()


def _sweep_point(args):
    config, pattern, load = args
    return run_sim(replace(config, injection_rate=load), pattern)


def sweep(config: SimConfig, loads: Iterable[float], pattern: str = "uniform", workers: int = 1,
          on_row=None) -> list[SimStats]:
    """One run per load; results come back in load order whatever the worker count."""
    loads = [float(x) for x in loads]
    if loads != sorted(loads):
        raise BadParams("loads must be sorted ascending")
    jobs = [(config, pattern, x) for x in loads]
    out = []
    if workers <= 1:
        for j in jobs:
            s = _sweep_point(j)
            out.append(s)
            if on_row:
                on_row(s)
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            for s in ex.map(_sweep_point, jobs):
                out.append(s)
                if on_row:
                    on_row(s)
    return out


def saturation_point(stats: list[SimStats]) -> float | None:
    """Smallest swept load whose accepted throughput fell below 99 % of offered."""
    for s in stats:
        if s.saturated:
            return s.offered
    return None


def find_saturation(config: SimConfig, pattern: str | TrafficPattern = "uniform", lo: float = 0.0,
                    hi: float = 1.0, tol: float = 0.01) -> tuple[float, list[SimStats]]:
    """Bisect the load axis for the onset of saturation.

    Returns the midpoint of the final bracket ``(last unsaturated, first
    saturated)`` and every run made on the way.
    """
    runs = []
    while hi - lo > tol:
        mid = round((lo + hi) / 2, 6)
        s = run_sim(replace(config, injection_rate=mid), pattern)
        runs.append(s)
        if s.saturated:
            hi = mid
        else:
            lo = mid
    return (lo + hi) / 2, runs


def config_from_dict(topology: Topology, d: dict) -> SimConfig:
    names = {f.name for f in fields(SimConfig)} - {"topology"}
    unknown = set(d) - names
    if unknown:
        raise BadParams(f"unknown simulation settings: {sorted(unknown)}")
    return SimConfig(topology=topology, **d)


def _plain(obj):
    return json.loads(json.dumps(obj, default=lambda o: o.tolist() if hasattr(o, "tolist") else str(o)))
