"""Topology builders: the MMS diameter-2 network and balanced reference networks."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product

import numpy as np

from .errors import BadParams, ConstructionInvalid, InvalidQ, NotPrimePower
from .field import Field, factor_prime_power, find_primitive_element, is_prime_power, make_field
from .graph import distance_profile
from .topology import Topology, canonical_edges


@dataclass(frozen=True)
class MMSParams:
    q: int
    w: int
    delta: int
    xi: int
    X: tuple[int, ...]
    X_prime: tuple[int, ...]

    @property
    def network_radix(self) -> int:
        return (3 * self.q - self.delta) // 2


def mms_params(q: int) -> MMSParams:
    """Primitive element and generator sets for ``q = 4w + delta``."""
    try:
        factor_prime_power(q)
    except NotPrimePower as exc:
        raise InvalidQ(f"q={q} is not a prime power") from exc
    if q < 4:
        raise InvalidQ(f"q={q} is too small (need q >= 4)")
    delta = {1: 1, 3: -1, 0: 0}.get(q % 4)
    if delta is None:
        raise InvalidQ(f"q={q} has no representation 4w + delta")
    w = (q - delta) // 4
    f = make_field(q)
    xi = find_primitive_element(f).value

    def powers(exps):
        return tuple(f.pow(xi, e) for e in exps)

    if delta == 1:
        X = powers(range(0, q - 2, 2))
        Xp = powers(range(1, q - 1, 2))
    elif delta == -1:
        X = powers(range(0, 2 * w - 1, 2)) + powers(range(2 * w - 1, 4 * w - 2, 2))
        Xp = powers(range(1, 2 * w, 2)) + powers(range(2 * w, 4 * w - 1, 2))
    else:
        # q - 1 is odd here, so the two sets share the element xi**0 == xi**(q-1)
        X = powers(range(0, q - 1, 2))
        Xp = powers(range(1, q, 2))
    return MMSParams(q, w, delta, xi, X, Xp)


def _tables(f: Field) -> tuple[np.ndarray, np.ndarray]:
    r = range(f.q)
    add = np.array([[f.add(a, b) for b in r] for a in r], dtype=np.int64)
    mul = np.array([[f.mul(a, b) for b in r] for a in r], dtype=np.int64)
    return add, mul


def build_mms(q: int, p: int | None = None, *, validate: bool = True) -> Topology:
    """MMS graph on ``2q^2`` routers with ``p = ceil(k'/2)`` unless overridden.

    Router ``(s, a, b)`` gets ID ``s*q*q + a*q + b``.  Construction is checked
    for regularity and diameter 2; a failing check raises ConstructionInvalid.
    """
    mp = mms_params(q)
    f = make_field(q)
    add, mul = _tables(f)
    kp = mp.network_radix
    if p is None:
        p = math.ceil(kp / 2)
    if p < 0:
        raise BadParams("concentration must be non-negative")

    a = np.arange(q)
    A, B = np.meshgrid(a, a, indexing="ij")
    A, B = A.ravel(), B.ravel()
    parts = []
    for s, gens in ((0, mp.X), (1, mp.X_prime)):
        base = s * q * q
        for g in gens:
            parts.append(np.stack([base + A * q + B, base + A * q + add[B, g]], axis=1))
    # (0, x, y) ~ (1, m, c) iff y = m*x + c
    X, M, C = (g.ravel() for g in np.meshgrid(a, a, a, indexing="ij"))
    Y = add[mul[M, X], C]
    parts.append(np.stack([X * q + Y, q * q + M * q + C], axis=1))
    edges = canonical_edges(np.concatenate(parts))

    n = 2 * q * q
    labels = tuple((s, x, y) for s in (0, 1) for x in range(q) for y in range(q))
    topo = Topology(
        kind="SF_MMS",
        n_routers=n,
        network_radix=kp,
        concentration=p,
        edges=edges,
        endpoints_per_router=np.full(n, p),
        labels=labels,
        group_of=np.array([x for _, x, _ in labels]),
        params={"q": q, "p": p, "w": mp.w, "delta": mp.delta, "xi": mp.xi,
                "X": list(mp.X), "X_prime": list(mp.X_prime)},
    )
    if validate:
        deg = topo.degrees
        if not (deg == kp).all() or topo.n_edges * 2 != n * kp:
            raise ConstructionInvalid(f"q={q}: graph is not {kp}-regular")
        counts = distance_profile(n, edges, max_levels=2)
        if int(counts.sum()) != n * (n - 1):
            raise ConstructionInvalid(f"q={q}: diameter exceeds 2")
    return topo


def mms_q_values(max_q: int) -> list[int]:
    """Every q >= 4 for which an MMS network exists, up to ``max_q``."""
    return [q for q in range(4, max_q + 1) if is_prime_power(q) and q % 4 != 2]


# -- balanced concentration rules for the reference kinds --

def balanced_concentration(kind: str, k: int) -> int:
    if kind == "DF":
        return (k + 1) // 4
    if kind == "FBF3":
        return (k + 3) // 4
    if kind == "DLN":
        return math.isqrt(k)
    if kind == "FT3":
        return k // 2
    if kind in ("T3D", "T5D", "HC"):
        return 1
    raise BadParams(f"no balanced concentration rule for {kind}")


def build_reference(kind: str, **params) -> Topology:
    """Build a reference topology.

    DF: ``p``, ``h``, ``a`` (default a = 2p, h = p) or ``k``; FT3: ``k``
    (even) or ``p``; FBF3: ``p`` or ``k``; T3D/T5D: ``dims``; HC: ``n``;
    DLN: ``n_routers``, ``y``, ``seed``.
    """
    kind = kind.upper()
    builders = {
        "DF": _dragonfly,
        "FT3": _fat_tree,
        "FBF3": _flattened_butterfly,
        "T3D": lambda **kw: _torus("T3D", 3, **kw),
        "T5D": lambda **kw: _torus("T5D", 5, **kw),
        "HC": _hypercube,
        "DLN": _random_ring,
    }
    if kind not in builders:
        raise BadParams(f"unknown reference kind {kind!r}")
    try:
        return builders[kind](**params)
    except TypeError as exc:
        raise BadParams(f"{kind}: {exc}") from exc


def _dragonfly(p=None, h=None, a=None, k=None, balanced=True, concentration=None):
    if k is not None and p is None:
        p = balanced_concentration("DF", k)
    if p is None:
        raise BadParams("DF needs p or k")
    h = p if h is None else h
    a = 2 * h if a is None else a
    if min(p, h, a) < 1:
        raise BadParams("DF parameters must be positive")
    if balanced and (a < 2 * h or p < h):
        raise BadParams(f"DF a={a}, h={h}, p={p} violates a >= 2h, p >= h")
    g = a * h + 1
    n = a * g
    edges = []
    for grp in range(g):
        base = grp * a
        edges += [(base + i, base + j) for i in range(a) for j in range(i + 1, a)]
        # global port t of a group leads to group grp + t + 1; the far end uses port a*h - 1 - t
        for t in range(a * h):
            other = (grp + t + 1) % g
            t2 = a * h - 1 - t
            edges.append((base + t // h, other * a + t2 // h))
    kp = (a - 1) + h
    conc = p if concentration is None else concentration
    return Topology(
        kind="DF",
        n_routers=n,
        network_radix=kp,
        concentration=conc,
        edges=canonical_edges(edges),
        endpoints_per_router=np.full(n, conc),
        labels=tuple((grp, i) for grp in range(g) for i in range(a)),
        group_of=np.repeat(np.arange(g), a),
        params={"p": conc, "h": h, "a": a, "g": g},
    )


def _fat_tree(k=None, p=None, concentration=None):
    """Port-symmetric 3-level fat tree (k-ary 3-tree with half radix m)."""
    if k is None and p is None:
        raise BadParams("FT3 needs k or p")
    m = p if p is not None else k // 2
    if k is not None and k != 2 * m:
        raise BadParams("FT3 radix must be even and equal 2p")
    if m < 1:
        raise BadParams("FT3 half radix must be positive")
    m2 = m * m
    edges = []
    for w0, w1, x in product(range(m), repeat=3):
        edges.append((w0 + m * w1, m2 + x + m * w1))  # edge -> aggregation
    for x, w1, y in product(range(m), repeat=3):
        edges.append((m2 + x + m * w1, 2 * m2 + x + m * y))  # aggregation -> core
    labels = tuple((lvl, d0, d1) for lvl in range(3) for d1 in range(m) for d0 in range(m))
    conc = m if concentration is None else concentration
    epr = np.zeros(3 * m2, dtype=np.int64)
    epr[:m2] = conc
    group = np.concatenate([np.repeat(np.arange(m), m), np.repeat(np.arange(m), m), np.full(m2, m)])
    return Topology(
        kind="FT3",
        n_routers=3 * m2,
        network_radix=m,
        concentration=conc,
        edges=canonical_edges(edges),
        endpoints_per_router=epr,
        labels=labels,
        group_of=group,
        params={"k": 2 * m, "p": conc, "m": m},
    )


def _flattened_butterfly(p=None, k=None, concentration=None):
    if p is None:
        if k is None:
            raise BadParams("FBF3 needs p or k")
        p = balanced_concentration("FBF3", k)
    if p < 2:
        raise BadParams("FBF3 needs p >= 2")
    n = p**3
    edges = []
    for r in range(n):
        x, y, z = r % p, (r // p) % p, r // (p * p)
        for dim, stride in enumerate((1, p, p * p)):
            coord = (x, y, z)[dim]
            for c in range(coord + 1, p):
                edges.append((r, r + (c - coord) * stride))
    conc = p if concentration is None else concentration
    return Topology(
        kind="FBF3",
        n_routers=n,
        network_radix=3 * (p - 1),
        concentration=conc,
        edges=canonical_edges(edges),
        endpoints_per_router=np.full(n, conc),
        labels=tuple((r % p, (r // p) % p, r // (p * p)) for r in range(n)),
        group_of=np.arange(n) // p,
        params={"p": conc, "side": p},
    )


def _torus(kind, ndim, dims=None, concentration=1):
    if dims is None or len(dims) != ndim:
        raise BadParams(f"{kind} needs {ndim} dimension sizes")
    dims = tuple(int(d) for d in dims)
    if min(dims) < 1:
        raise BadParams("torus dimensions must be positive")
    n = int(np.prod(dims))
    strides = np.cumprod((1,) + dims[:-1])
    edges = []
    for r in range(n):
        coords = [(r // strides[i]) % dims[i] for i in range(ndim)]
        for i, size in enumerate(dims):
            if size < 2:
                continue
            nxt = r + (((coords[i] + 1) % size) - coords[i]) * strides[i]
            if nxt != r:
                edges.append((r, nxt))
    kp = sum(2 if s > 2 else (1 if s == 2 else 0) for s in dims)
    return Topology(
        kind=kind,
        n_routers=n,
        network_radix=kp,
        concentration=concentration,
        edges=canonical_edges(edges),
        endpoints_per_router=np.full(n, concentration),
        labels=tuple(tuple((r // strides[i]) % dims[i] for i in range(ndim)) for r in range(n)),
        group_of=np.arange(n) // dims[0],
        params={"dims": list(dims), "p": concentration},
    )


def _hypercube(n=None, concentration=1, rack_dims=5):
    if n is None or n < 1:
        raise BadParams("HC needs dimension n >= 1")
    size = 1 << n
    edges = [(r, r ^ (1 << b)) for r in range(size) for b in range(n) if r < r ^ (1 << b)]
    return Topology(
        kind="HC",
        n_routers=size,
        network_radix=n,
        concentration=concentration,
        edges=canonical_edges(edges),
        endpoints_per_router=np.full(size, concentration),
        labels=tuple((r,) for r in range(size)),
        group_of=np.arange(size) >> min(n, rack_dims),
        params={"n": n, "p": concentration, "rack_dims": min(n, rack_dims)},
    )


def dln_concentration(network_radix: int) -> int:
    """Largest p with p = floor(sqrt(k' + p))."""
    p = 0
    while (p + 1) ** 2 <= network_radix + p + 1:
        p += 1
    return p


def _random_ring(n_routers=None, y=None, seed=0, group_size=None, concentration=None,
                 max_rounds=10_000):
    """Ring plus ``y`` random shortcut stubs per router, paired at random."""
    n, y = n_routers, y
    if n is None or y is None or n < 3 or y < 0:
        raise BadParams("DLN needs n_routers >= 3 and y >= 0")
    if (n * y) % 2:
        raise BadParams("n_routers * y must be even")
    if 2 + y > n - 1:
        raise BadParams("too many shortcuts for this ring")
    rng = np.random.default_rng(seed)
    used = {(min(i, (i + 1) % n), max(i, (i + 1) % n)) for i in range(n)}
    shortcuts: list[tuple[int, int]] = []
    stubs = np.repeat(np.arange(n), y)
    for _ in range(max_rounds):
        if len(stubs) == 0:
            break
        rng.shuffle(stubs)
        bad = []
        for u, v in stubs.reshape(-1, 2).tolist():
            e = (min(u, v), max(u, v))
            if u == v or e in used:
                bad += [u, v]
            else:
                used.add(e)
                shortcuts.append(e)
        if bad and len(bad) == len(stubs):
            # every remaining pairing is invalid: dissolve a random placed shortcut
            i = int(rng.integers(len(shortcuts)))
            e = shortcuts.pop(i)
            used.discard(e)
            bad += list(e)
        stubs = np.array(bad, dtype=np.int64)
    else:
        raise ConstructionInvalid("could not place DLN shortcuts")
    kp = 2 + y
    conc = dln_concentration(kp) if concentration is None else concentration
    gs = group_size or max(1, 2 * conc)
    return Topology(
        kind="DLN",
        n_routers=n,
        network_radix=kp,
        concentration=conc,
        edges=canonical_edges(sorted(used)),
        endpoints_per_router=np.full(n, conc),
        labels=tuple((r,) for r in range(n)),
        group_of=np.arange(n) // gs,
        params={"n_routers": n, "y": y, "seed": seed, "p": conc, "group_size": gs},
    )


# -- closed-form counts --

def moore_bound(k_prime: int, D: int) -> int:
    """Largest router count possible at network radix ``k_prime`` and diameter ``D``."""
    if k_prime < 2 or D < 1:
        raise BadParams("moore_bound needs k' >= 2 and D >= 1")
    return 1 + k_prime * sum((k_prime - 1) ** i for i in range(D))


def diam3_counts(kind: str, param: int | None = None, *, k_prime: int | None = None) -> tuple[int, int]:
    """(k', N_r) of the diameter-3 families.

    BDF takes an odd prime power ``u`` (k' = 3(u+1)/2); DEL takes a prime
    power ``v`` (k' = (v+1)^2).  Passing ``k_prime`` instead evaluates the
    BDF count formula directly at that radix without the prime-power check.
    """
    kind = kind.upper()
    if kind == "BDF":
        if k_prime is None:
            u = param
            if u is None or u % 2 == 0 or not is_prime_power(u):
                raise BadParams(f"BDF needs an odd prime power u, got {u}")
            k_prime = 3 * (u + 1) // 2
        elif k_prime % 3 or (2 * k_prime // 3 - 1) % 2 == 0:
            raise BadParams(f"k'={k_prime} is not of the form 3(u+1)/2 with odd u")
        kp = Fraction(k_prime)
        nr = Fraction(8, 27) * kp**3 - Fraction(4, 9) * kp**2 + Fraction(2, 3) * kp
        if nr.denominator != 1:
            raise BadParams(f"BDF count is not integral at k'={k_prime}")
        return k_prime, int(nr)
    if kind == "DEL":
        v = param
        if v is None or not is_prime_power(v):
            raise BadParams(f"DEL needs a prime power v, got {v}")
        return (v + 1) ** 2, (v + 1) ** 2 * (v * v + 1) ** 2
    raise BadParams(f"unknown diameter-3 family {kind!r}")


def channel_load(n_routers: int, k_prime: int, p: int) -> Fraction:
    """Average number of minimal routes per channel under all-to-all traffic."""
    if min(n_routers, k_prime) <= 0 or p < 0:
        raise BadParams("channel_load needs positive N_r, k'")
    return Fraction((2 * n_routers - k_prime - 2) * p * p, k_prime)


def full_bandwidth_concentration(n_routers: int, k_prime: int) -> int:
    """ceil(k' N_r / (2 N_r - k' - 2)), the smallest p meeting the balance point."""
    f = Fraction(k_prime * n_routers, 2 * n_routers - k_prime - 2)
    return math.ceil(f)


def is_balanced(n_routers: int, k_prime: int, p: int) -> bool:
    """True when p does not exceed the rounded-up balance point."""
    return p <= full_bandwidth_concentration(n_routers, k_prime)
