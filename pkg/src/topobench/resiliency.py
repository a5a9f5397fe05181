"""Monte Carlo link-failure experiments.

A fraction f of the router-to-router cables is removed uniformly at random
(``ceil(f * E)`` cables) and the damaged graph is checked against one of
three survival criteria:

* ``disconnection``: the graph stays connected;
* ``diameter_increase``: the diameter grows by at most ``max_increase`` (2);
* ``avgpath_increase``: the mean router distance grows by at most
  ``max_increase`` (1).

Trials at a fraction are drawn in fixed-size batches until the Wilson
interval for the survival probability is narrow enough.  Everything is
vectorised over the trials of a batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import isotonic_regression
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.stats import norm

from .errors import BadParams, NoBalancedVariant
from .graph import diameter_and_mean, is_connected, neighbor_table
from .topology import Topology

METRICS = ("disconnection", "diameter_increase", "avgpath_increase")
DEFAULT_INCREASE = {"disconnection": 0, "diameter_increase": 2, "avgpath_increase": 1}

CSV_FIELDS = ("fraction", "survival_probability", "ci_low", "ci_high", "trials")

# Published disconnection thresholds (percent) by approximate network size.
# None marks sizes where the kind has no balanced variant.
REFERENCE_DISCONNECTION = {
    "T3D": {256: 25, 512: None, 1024: 15, 2048: 10, 4096: 5, 8192: 5},
    "T5D": {256: 50, 512: None, 1024: 40, 2048: None, 4096: 40, 8192: 35},
    "HC": {256: 40, 512: 40, 1024: 40, 2048: 40, 4096: 45, 8192: 45},
    "LH_HC": {256: 55, 512: 55, 1024: 55, 2048: 55, 4096: 55, 8192: 55},
    "FT3": {256: None, 512: 35, 1024: 40, 2048: 40, 4096: 55, 8192: 60},
    "DF": {256: 45, 512: None, 1024: 50, 2048: 55, 4096: 60, 8192: 65},
    "FBF3": {256: 50, 512: 55, 1024: 60, 2048: 65, 4096: 70, 8192: None},
    "DLN": {256: None, 512: 60, 1024: None, 2048: 65, 4096: 70, 8192: 75},
    "SF": {256: 45, 512: 60, 1024: None, 2048: 65, 4096: 70, 8192: 75},
}


def reference_threshold(kind: str, approx_n: int) -> int:
    """Published disconnection threshold in percent for ``kind`` at ``approx_n``.

    Raises NoBalancedVariant where no balanced variant of that size exists
    rather than interpolating.
    """
    key = kind.upper().replace("-", "_")
    if key not in REFERENCE_DISCONNECTION:
        raise BadParams(f"no reference row for {kind}")
    row = REFERENCE_DISCONNECTION[key]
    if approx_n not in row:
        raise BadParams(f"reference sizes are {sorted(row)}")
    if row[approx_n] is None:
        raise NoBalancedVariant(f"{kind} has no balanced variant with N ~ {approx_n}")
    return row[approx_n]


def wilson_interval(successes, trials, confidence: float = 0.95) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    z = norm.ppf(0.5 + confidence / 2)
    p = successes / trials
    z2n = z * z / trials
    centre = (p + z2n / 2) / (1 + z2n)
    half = z * math.sqrt(p * (1 - p) / trials + z2n / (4 * trials)) / (1 + z2n)
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == trials else min(1.0, centre + half)
    return float(lo), float(hi)


@dataclass
class FailureExperiment:
    topology: Topology
    metric: str = "disconnection"
    increment: float = 0.05
    confidence: float = 0.95
    ci_width: float = 0.02
    seed: int = 0
    cutoff: float = 0.5
    max_increase: float | None = None
    max_trials: int = 50_000
    batch: int | None = None

    def __post_init__(self):
        if self.metric not in METRICS:
            raise BadParams(f"metric must be one of {METRICS}")
        if not 0 < self.increment < 1:
            raise BadParams("increment must lie in (0, 1)")
        if not 0 < self.confidence < 1 or not 0 < self.ci_width < 1:
            raise BadParams("confidence and ci_width must lie in (0, 1)")
        if not 0 < self.cutoff <= 1:
            raise BadParams("cutoff must lie in (0, 1]")
        if self.max_increase is None:
            self.max_increase = DEFAULT_INCREASE[self.metric]
        if self.batch is None:
            # keep a batch's edge arrays around a few million entries
            e = max(self.topology.n_edges, 1)
            self.batch = int(min(512, max(16, 2_000_000 // e)))

    @property
    def fractions(self) -> np.ndarray:
        steps = int(math.floor(1 / self.increment + 1e-9))
        return np.round(np.arange(steps + 1) * self.increment, 10)

    def to_dict(self) -> dict:
        return {
            "kind": self.topology.kind,
            "params": {k: v for k, v in self.topology.params.items() if isinstance(v, (int, float, str))},
            "metric": self.metric,
            "increment": self.increment,
            "confidence": self.confidence,
            "ci_width": self.ci_width,
            "seed": self.seed,
            "cutoff": self.cutoff,
            "max_increase": self.max_increase,
            "max_trials": self.max_trials,
            "batch": self.batch,
        }


@dataclass
class SurvivalPoint:
    fraction: float
    removed: int
    survived: int
    trials: int
    ci_low: float
    ci_high: float
    probability: float  # after the monotone clamp

    @property
    def raw_probability(self) -> float:
        return self.survived / self.trials if self.trials else 0.0

    def csv_row(self) -> list:
        return [f"{self.fraction:.2f}", f"{self.probability:.6f}", f"{self.ci_low:.6f}",
                f"{self.ci_high:.6f}", self.trials]


@dataclass
class ResiliencyResult:
    experiment: FailureExperiment
    curve: list[SurvivalPoint] = field(default_factory=list)
    threshold: float = 0.0
    smoothed: bool = False
    baseline: float = 0.0

    @property
    def threshold_percent(self) -> int:
        return int(round(self.threshold * 100))

    def summary_row(self) -> list:
        return ["threshold", f"{self.threshold:.2f}", f"cutoff={self.experiment.cutoff}",
                f"smoothed={int(self.smoothed)}", sum(p.trials for p in self.curve)]

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment.to_dict(),
            "baseline": self.baseline,
            "threshold": self.threshold,
            "threshold_percent": self.threshold_percent,
            "smoothed": self.smoothed,
            "curve": [
                {"fraction": p.fraction, "removed": p.removed, "survival_probability": p.probability,
                 "raw_probability": p.raw_probability, "ci_low": p.ci_low, "ci_high": p.ci_high,
                 "trials": p.trials}
                for p in self.curve
            ],
        }


class _Batcher:
    """Survival checks for a batch of trials, each with its own removed-edge set."""

    def __init__(self, exp: FailureExperiment):
        t = exp.topology
        self.n = t.n_routers
        self.edges = t.edges
        self.E = len(t.edges)
        self.metric = exp.metric
        diam, mean = diameter_and_mean(self.n, self.edges)
        self.baseline = mean if exp.metric == "avgpath_increase" else diam
        self.limit = self.baseline + exp.max_increase
        if exp.metric != "disconnection":
            self.table = neighbor_table(self.n, self.edges)
            self.slot_edge = self._slot_edges()
            self.words = (self.n + 63) // 64

    def _slot_edges(self) -> np.ndarray:
        # edge id behind each neighbour-table slot, -1 on padding
        lookup = {}
        for i, (u, v) in enumerate(self.edges.tolist()):
            lookup[(u, v)] = i
            lookup[(v, u)] = i
        out = np.full(self.table.shape, -1, dtype=np.int64)
        for u in range(self.n):
            for j, v in enumerate(self.table[u].tolist()):
                if v != u:
                    out[u, j] = lookup[(u, v)]
        return out

    def removal_masks(self, rng: np.random.Generator, size: int, k: int) -> np.ndarray:
        """Boolean (size, E) masks with exactly ``k`` removed edges per row."""
        keys = rng.random((size, self.E))
        if k == 0:
            return np.zeros((size, self.E), dtype=bool)
        if k >= self.E:
            return np.ones((size, self.E), dtype=bool)
        cut = np.partition(keys, k - 1, axis=1)[:, k - 1 : k]
        return keys <= cut

    def survives(self, removed: np.ndarray) -> np.ndarray:
        if self.metric == "disconnection":
            return self._connected(removed)
        return self._distance_ok(removed)

    def _connected(self, removed: np.ndarray) -> np.ndarray:
        B, n = len(removed), self.n
        b, e = np.nonzero(~removed)
        u = self.edges[e, 0] + b * n
        v = self.edges[e, 1] + b * n
        g = coo_matrix((np.ones(len(u), dtype=np.int8), (u, v)), shape=(B * n, B * n))
        _, labels = connected_components(g, directed=False)
        labels = labels.reshape(B, n)
        return (labels == labels[:, :1]).all(axis=1)

    def _distance_ok(self, removed: np.ndarray) -> np.ndarray:
        B, n, W = len(removed), self.n, self.words
        selfidx = np.arange(n)[None, :, None]
        gone = np.where(self.slot_edge[None] >= 0, removed[:, np.maximum(self.slot_edge, 0)], True)
        tables = np.where(gone, selfidx, self.table[None])  # (B, n, deg)
        reach = np.zeros((B, n, W), dtype=np.uint64)
        idx = np.arange(n)
        reach[:, idx, idx // 64] = np.left_shift(np.uint64(1), (idx % 64).astype(np.uint64))
        bidx = np.arange(B)[:, None]
        reached = np.full(B, n, dtype=np.int64)
        dist_sum = np.zeros(B, dtype=np.int64)
        full = n * n
        max_levels = n - 1 if self.metric == "avgpath_increase" else int(self.limit)
        for level in range(1, max_levels + 1):
            nxt = reach.copy()
            for j in range(tables.shape[2]):
                np.bitwise_or(nxt, reach[bidx, tables[:, :, j]], out=nxt)
            now = np.bitwise_count(nxt).sum(axis=(1, 2)).astype(np.int64)
            dist_sum += level * (now - reached)
            if (now == reached).all():
                break
            reached = now
            reach = nxt
            if (reached == full).all():
                break
        connected = reached == full
        if self.metric == "diameter_increase":
            return connected
        mean = dist_sum / (n * (n - 1))
        return connected & (mean <= self.limit + 1e-12)


def run_experiment(exp: FailureExperiment) -> ResiliencyResult:
    """Survival curve and survivable removal fraction for ``exp``.

    At each multiple of ``increment`` trials continue in batches until the
    Wilson interval is at most ``ci_width`` wide (or ``max_trials`` is hit).
    The scan stops after the first fraction where no trial survives.  The
    reported curve is the trial-weighted isotonic (non-increasing) fit of
    the raw estimates; ``smoothed`` says whether the fit changed anything.
    The threshold is the largest fraction whose clamped probability is at
    least ``cutoff``.
    """
    t = exp.topology
    if not is_connected(t.n_routers, t.edges):
        raise BadParams("failure experiments need a connected topology")
    box = _Batcher(exp)
    rows = []
    for fi, f in enumerate(exp.fractions.tolist()):
        k = min(box.E, int(math.ceil(f * box.E - 1e-9)))
        survived = trials = 0
        bi = 0
        while True:
            rng = np.random.default_rng([exp.seed, fi, bi])
            size = min(exp.batch, exp.max_trials - trials)
            ok = box.survives(box.removal_masks(rng, size, k))
            survived += int(ok.sum())
            trials += size
            bi += 1
            lo, hi = wilson_interval(survived, trials, exp.confidence)
            if hi - lo <= exp.ci_width or trials >= exp.max_trials:
                break
        rows.append((f, k, survived, trials, lo, hi))
        if survived == 0:
            break
    raw = np.array([r[2] / r[3] for r in rows])
    weights = np.array([r[3] for r in rows], dtype=float)
    fit = isotonic_regression(raw, weights=weights, increasing=False).x
    fit = np.clip(fit, 0.0, 1.0)
    smoothed = bool(np.abs(fit - raw).max() > 1e-12)
    curve = [SurvivalPoint(f, k, s, n, lo, hi, float(p)) for (f, k, s, n, lo, hi), p in zip(rows, fit)]
    ok = [p.fraction for p in curve if p.probability >= exp.cutoff - 1e-12]
    return ResiliencyResult(exp, curve, max(ok, default=0.0), smoothed, float(box.baseline))


def survivable_fraction(exp: FailureExperiment) -> float:
    """Largest removal fraction that the majority of trials survive."""
    return run_experiment(exp).threshold
