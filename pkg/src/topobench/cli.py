"""``topobench`` command line.

Every command prints a small header of ``#`` comment lines (tool version,
timestamp, resolved config) followed by CSV rows, or one JSON document.
Only the timestamp changes between two runs with the same seed.  Errors go
to stderr as ``{"error": ..., "message": ...}`` with a nonzero exit code.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import zlib
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .costpower import comparison_rows, load_preset, report_row, REPORT_FIELDS
from .errors import BadParams, TopoBenchError
from .metrics import bisection_search, structural_report
from .resiliency import CSV_FIELDS as RES_FIELDS, FailureExperiment, run_experiment
from .sim import SimStats, config_from_dict, sweep
from .topogen import build_mms, build_reference, diam3_counts, mms_params, mms_q_values, moore_bound
from .topology import from_edge_list

KINDS = ("sf", "df", "ft3", "fbf3", "t3d", "t5d", "hc", "dln", "custom")

# flags that only shape where output goes; never part of the replay config
_NOT_CONFIG = {"command", "config", "output", "func", "workers"}


def split_seed(seed: int, subsystem: str) -> int:
    """Independent 63-bit seed for one subsystem, derived from the user seed."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(zlib.crc32(subsystem.encode()),))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def parse_loads(text: str) -> list[float]:
    """``a:b:step`` (inclusive of b) or a comma list."""
    if ":" in text:
        try:
            a, b, step = (float(x) for x in text.split(":"))
        except ValueError:
            raise BadParams(f"bad load range {text!r}; expected a:b:step") from None
        if step <= 0 or b < a:
            raise BadParams(f"bad load range {text!r}")
        n = int(round((b - a) / step))
        return [round(a + i * step, 10) for i in range(n + 1) if a + i * step <= b + 1e-9]
    return [float(x) for x in text.split(",") if x.strip()]


def build_topology(args):
    kind = args.kind.lower()
    if kind == "sf":
        if args.q is None:
            raise BadParams("--kind sf needs --q")
        return build_mms(args.q, args.p)
    if kind == "custom":
        if not args.edge_list:
            raise BadParams("--kind custom needs --edge-list")
        return from_edge_list(Path(args.edge_list).read_text(), concentration=args.p or 1)
    params = {}
    for name in ("p", "h", "a", "k", "n", "y"):
        val = getattr(args, name)
        if val is not None:
            params[name] = val
    if args.dims:
        params["dims"] = [int(x) for x in args.dims.split(",")]
    if args.n_routers is not None:
        params["n_routers"] = args.n_routers
    if kind == "dln":
        params["seed"] = split_seed(args.seed, "dln")
    if args.concentration is not None:
        params["concentration"] = args.concentration
    return build_reference(kind.upper(), **params)


def _stamp() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def resolved_config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_CONFIG}


def emit(args, fields, rows, extra=None):
    """Write rows in the requested format; returns the text written."""
    cfg = resolved_config(args)
    if args.format == "json":
        doc = {"tool": f"topobench {__version__}", "generated": _stamp(), "command": args.command,
               "config": cfg, "rows": rows}
        if extra:
            doc.update(extra)
        text = json.dumps(doc, indent=2, default=_json_default) + "\n"
    else:
        buf = io.StringIO()
        buf.write(f"# topobench {__version__} {args.command}\n")
        buf.write(f"# generated: {_stamp()}\n")
        buf.write(f"# config: {json.dumps(cfg, sort_keys=True, default=_json_default)}\n")
        w = csv.DictWriter(buf, fieldnames=list(fields), extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r)
        text = buf.getvalue()
    if args.output and args.command != "generate":
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return text


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serialisable: {type(o).__name__}")


# -- commands --

def cmd_generate(args):
    t = build_topology(args)
    if args.output:
        Path(f"{args.output}.edges").write_text(t.to_edge_list())
        Path(f"{args.output}.json").write_text(t.to_json())
    rows = [{"u": int(u), "v": int(v)} for u, v in t.edges.tolist()]
    extra = {"descriptor": {k: v for k, v in t.descriptor().items() if k != "edges"}}
    emit(args, ("u", "v"), rows, extra)


def cmd_analyze(args):
    t = build_topology(args)
    rep = structural_report(t, restarts=args.restarts, seed=split_seed(args.seed, "bisection"),
                            bisection=not args.no_bisection)
    row = rep.csv_row()
    row["N_r"] = rep.n_routers
    emit(args, rep.CSV_FIELDS + ("N_r",), [row])


def cmd_bisection(args):
    t = build_topology(args)
    res = bisection_search(t, restarts=args.restarts, seed=split_seed(args.seed, "bisection"))
    rows = [{"kind": t.kind, "N_r": t.n_routers, "restarts": res.restarts, "best_cut": res.best,
             "median_cut": f"{res.median:g}", "cuts": " ".join(map(str, res.cuts))}]
    emit(args, ("kind", "N_r", "restarts", "best_cut", "median_cut", "cuts"), rows)


def cmd_resiliency(args):
    t = build_topology(args)
    exp = FailureExperiment(t, args.metric, increment=args.increment, confidence=args.confidence,
                            ci_width=args.ci_width, seed=split_seed(args.seed, "resiliency"),
                            cutoff=args.cutoff, max_trials=args.max_trials)
    res = run_experiment(exp)
    rows = [dict(zip(RES_FIELDS, p.csv_row())) for p in res.curve]
    rows.append(dict(zip(RES_FIELDS, res.summary_row())))
    emit(args, RES_FIELDS, rows, {"threshold": res.threshold, "smoothed": res.smoothed})


def _sim_settings(args) -> dict:
    d = {"routing": args.routing.upper(), "seed": split_seed(args.seed, "simulate")}
    for name in ("buffer_flits_per_port", "vc_count", "ugal_candidates", "warmup_cycles", "warmup_window",
                 "warmup_cap", "measure_cycles", "drain_cap", "queue_signal"):
        val = getattr(args, name)
        if val is not None:
            d[name] = val
    return d


def cmd_simulate(args):
    t = build_topology(args)
    loads = parse_loads(args.loads)
    if not loads:
        raise BadParams("no loads given")
    base = config_from_dict(t, {**_sim_settings(args), "injection_rate": loads[0]})
    stats = sweep(base, loads, args.pattern, workers=args.workers)
    rows = [s.csv_row() for s in stats]
    emit(args, SimStats.CSV_FIELDS, rows)


def cmd_cost(args):
    preset = load_preset(args.preset, args.price_config)
    if args.comparison:
        rows = comparison_rows(preset)
    else:
        t = build_topology(args)
        rows = [report_row(t, radix=args.radix, preset=preset, endpoint_links=not args.no_endpoint_links)]
    fields = REPORT_FIELDS + ("k_structural", "router_cost_total", "electric_cost", "optic_cost",
                              "endpoint_cables", "preset")
    emit(args, fields, rows)


def cmd_moore(args):
    rows = []
    if args.k_prime is not None:
        rows.append({"family": "moore", "q": "", "k_prime": args.k_prime, "N_r": "",
                     "moore_bound": moore_bound(args.k_prime, args.diameter), "ratio": ""})
    for q in mms_q_values(args.max_q):
        kp = mms_params(q).network_radix
        mb = moore_bound(kp, 2)
        nr = 2 * q * q
        rows.append({"family": "MMS", "q": q, "k_prime": kp, "N_r": nr, "moore_bound": mb,
                     "ratio": f"{nr / mb:.6f}"})
    for v in args.del_v or ():
        kp, nr = diam3_counts("DEL", v)
        mb = moore_bound(kp, 3)
        rows.append({"family": "DEL", "q": v, "k_prime": kp, "N_r": nr, "moore_bound": mb,
                     "ratio": f"{nr / mb:.6f}"})
    emit(args, ("family", "q", "k_prime", "N_r", "moore_bound", "ratio"), rows)


# -- parser --

def _topology_flags(p):
    g = p.add_argument_group("topology")
    g.add_argument("--kind", choices=KINDS, default="sf", type=str.lower)
    g.add_argument("--q", type=int, help="MMS field order")
    g.add_argument("--p", type=int, help="concentration (SF, DF, FT3 half radix, FBF3 side)")
    g.add_argument("--h", type=int, help="DF global links per router")
    g.add_argument("--a", type=int, help="DF routers per group")
    g.add_argument("--k", type=int, help="router radix for kinds that accept it")
    g.add_argument("--n", type=int, help="hypercube dimension")
    g.add_argument("--y", type=int, help="DLN shortcuts per router")
    g.add_argument("--n-routers", type=int, help="DLN router count")
    g.add_argument("--dims", help="torus dimensions, comma separated")
    g.add_argument("--concentration", type=int)
    g.add_argument("--edge-list", help="edge list file for --kind custom")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="topobench", description="Topology generation, analysis, "
                                     "simulation, resiliency and cost experiments.")
    parser.add_argument("--version", action="version", version=f"topobench {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help, topo=True):
        p = sub.add_parser(name, help=help)
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--config", help="JSON file (or a previous CSV/JSON output) whose settings override flags")
        p.add_argument("--output", help="write here instead of stdout (generate: file prefix)")
        if topo:
            _topology_flags(p)
        p.set_defaults(func=func)
        return p

    add("generate", cmd_generate, "build a topology and write its edge list and descriptor")

    p = add("analyze", cmd_analyze, "diameter, average distance and bisection")
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--no-bisection", action="store_true")

    p = add("bisection", cmd_bisection, "balanced min-cut search")
    p.add_argument("--restarts", type=int, default=8)

    p = add("resiliency", cmd_resiliency, "random link-failure survival curve")
    p.add_argument("--metric", default="disconnection",
                   choices=("disconnection", "diameter_increase", "avgpath_increase"))
    p.add_argument("--increment", type=float, default=0.05)
    p.add_argument("--confidence", type=float, default=0.95)
    p.add_argument("--ci-width", type=float, default=0.02)
    p.add_argument("--cutoff", type=float, default=0.5)
    p.add_argument("--max-trials", type=int, default=50_000)

    p = add("simulate", cmd_simulate, "flit-level load sweep")
    p.add_argument("--routing", default="min", type=str.lower,
                   choices=("min", "val", "ugal_l", "ugal_g", "anca"))
    p.add_argument("--pattern", default="uniform",
                   choices=("uniform", "shift", "shuffle", "bitrev", "bitcomp", "worstcase"))
    p.add_argument("--loads", default="0.1:0.9:0.1", help="a:b:step or comma list")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--buffer-flits-per-port", type=int)
    p.add_argument("--vc-count", type=int)
    p.add_argument("--ugal-candidates", type=int)
    p.add_argument("--queue-signal", choices=("credits", "output"))
    p.add_argument("--warmup-cycles", type=int)
    p.add_argument("--warmup-window", type=int)
    p.add_argument("--warmup-cap", type=int)
    p.add_argument("--measure-cycles", type=int)
    p.add_argument("--drain-cap", type=int)

    p = add("cost", cmd_cost, "cost and power report")
    p.add_argument("--preset", default="fdr10")
    p.add_argument("--price-config", help="JSON file overriding preset prices")
    p.add_argument("--radix", type=int, help="charge this router radix instead of k' + p")
    p.add_argument("--no-endpoint-links", action="store_true")
    p.add_argument("--comparison", action="store_true", help="SF q=19 vs same-radix DF rows")

    p = add("moore", cmd_moore, "MMS router counts against the Moore bound", topo=False)
    p.add_argument("--max-q", type=int, default=32)
    p.add_argument("--k-prime", type=int)
    p.add_argument("--diameter", type=int, default=2)
    p.add_argument("--del-v", type=int, action="append", help="add a DEL diameter-3 row for prime power v")
    return parser


def _load_config(path: str) -> dict:
    text = Path(path).read_text()
    for line in text.splitlines():
        if line.startswith("# config: "):
            return json.loads(line[len("# config: "):])
    doc = json.loads(text)
    return doc.get("config", doc) if isinstance(doc, dict) else {}


def parse_args(argv=None) -> argparse.Namespace:
    parser = make_parser()
    args = parser.parse_args(argv)
    if args.config:
        over = _load_config(args.config)
        known = set(vars(args))
        unknown = set(over) - known
        if unknown:
            raise BadParams(f"unknown config keys {sorted(unknown)}")
        for k, v in over.items():
            if k not in _NOT_CONFIG:
                setattr(args, k, v)
    return args


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        args.func(args)
    except TopoBenchError as exc:
        sys.stderr.write(json.dumps(exc.to_dict()) + "\n")
        return 2
    except BrokenPipeError:
        # reader went away (e.g. piped into head); nothing left to report
        sys.stdout = open(os.devnull, "w")
        return 0
    except (OSError, ValueError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
