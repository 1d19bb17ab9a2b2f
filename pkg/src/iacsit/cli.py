"""Command-line entry point: ``iacsit <subcommand> ...``.

Exit codes: 0 success, 1 usage or input error, 2 infeasible configuration
(``feasibility`` only), 3 an internal guard was hit.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .channel_model import RNG_ID, AntennaConfig, ConfigParseError, draw_channel, parse_config
from .csit_allocation import (
    CsitAllocation,
    RemovalPlan,
    allocate_super,
    allocation_size,
    complete_size,
)
from .experiments import feedback_size_sweep, load_spec, rate_vs_snr
from .feasibility import EnumerationGuardError, is_feasible, is_feasible_bruteforce
from .precoding import SolverOptions, distributed_precode

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_GUARD = 3
WORKERS_ENV = "IACSIT_WORKERS"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; 2 is reserved for "infeasible"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _config(text: str) -> AntennaConfig:
    p = Path(text)
    if not text.lstrip().startswith("[") and p.is_file():
        text = p.read_text().strip()
    return parse_config(text)


def _default_workers() -> int:
    v = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(v))
    except ValueError:
        raise UsageError(f"{WORKERS_ENV}={v!r} is not an integer")


def _emit(obj: dict, as_json: bool, text: str) -> None:
    print(json.dumps(obj, indent=2) if as_json else text)


def cmd_feasibility(args) -> int:
    cfg = _config(args.config)
    rep = is_feasible_bruteforce(cfg) if args.brute_force else is_feasible(cfg)
    d = {"config": str(cfg), **rep.to_dict()}
    lines = [f"{cfg}: {rep.classification.value}"]
    if rep.witness is not None:
        nv, ne = rep.witness_counts
        what = "violating" if not rep.feasible else "smallest tight"
        lines.append(f"{what} sub-IC {rep.witness}: n_var={nv}, n_eq={ne}")
    _emit(d, args.json, "\n".join(lines))
    return EXIT_OK if rep.feasible else EXIT_INFEASIBLE


def allocation_report(cfg: AntennaConfig, mode: str) -> dict:
    plan, alloc = allocate_super(cfg, mode)
    size = allocation_size(plan.reduced_config, alloc)
    full = complete_size(cfg)
    return {
        "config": str(cfg),
        "classification": is_feasible(cfg).classification.value,
        "mode": mode,
        "removal_plan": plan.to_dict(),
        "masks": alloc.to_list(),
        "size": size,
        "complete_size": full,
        "reduction_ratio": 1.0 - size / full,
    }


def cmd_allocate(args) -> int:
    cfg = _config(args.config)
    if not is_feasible(cfg).feasible:
        print(f"{cfg} is infeasible; no allocation exists", file=sys.stderr)
        return EXIT_INFEASIBLE
    d = allocation_report(cfg, args.mode)
    plan = d["removal_plan"]
    lines = [f"{cfg}: {d['classification']}"]
    if plan["rx_removals"] or plan["tx_removals"]:
        lines.append(
            f"remove RX {plan['rx_removals']} TX {plan['tx_removals']} -> {plan['reduced_config']}"
        )
    for m in d["masks"]:
        sets = "" if m["kind"] == "COMPLETE" else f" ({set(m['rx_set']) or '{}'}, {set(m['tx_set']) or '{}'})"
        lines.append(f"  TX{m['tx']}: {m['kind']}{sets}")
    lines.append(f"size {d['size']} / complete {d['complete_size']} (reduction {d['reduction_ratio']:.1%})")
    _emit(d, args.json, "\n".join(lines))
    return EXIT_OK


def cmd_precode(args) -> int:
    cfg = _config(args.config)
    if not is_feasible(cfg).feasible:
        print(f"{cfg} is infeasible", file=sys.stderr)
        return EXIT_INFEASIBLE
    if args.alloc == "auto":
        plan, alloc = allocate_super(cfg, args.mode)
    else:
        doc = json.loads(Path(args.alloc).read_text())
        alloc = CsitAllocation.from_list(doc["masks"])
        plan = RemovalPlan.from_dict(doc["removal_plan"]) if doc.get("removal_plan") else None
    H = draw_channel(cfg, args.seed)
    opts = SolverOptions(args.tol, args.max_iter, args.seed)
    res = distributed_precode(cfg, alloc, H, opts, plan, return_details=True)
    d = {
        "config": str(cfg),
        "seed": args.seed,
        "converged": res.converged,
        "leakage": res.leakage,
        "trace": {str(k): t.values for k, t in sorted(res.tx_traces.items())},
        "beamformers": res.beamformers.to_dict(),
    }
    text = "\n".join(
        [f"{cfg} seed {args.seed}: leakage {res.leakage:.3e}, converged={res.converged}"]
        + [f"  TX{k}: {t.iterations_used} iterations, final {t.final:.3e}" for k, t in sorted(res.tx_traces.items())]
    )
    _emit(d, args.json, text)
    return EXIT_OK


def _simulate(args, kind: str) -> int:
    spec = load_spec(args.specfile, kind)
    workers = args.workers if args.workers is not None else _default_workers()
    table = rate_vs_snr(spec, workers) if kind == "rate" else feedback_size_sweep(spec, workers)
    if args.out:
        p_csv, p_json = table.write(args.out)
        print(f"wrote {p_csv} and {p_json}", file=sys.stderr)
    print(table.to_json() if args.json else table.to_csv(), end="" if not args.json else "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="iacsit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"iacsit {__version__} ({RNG_ID})")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("feasibility", help="decide IA feasibility of a configuration")
    f.add_argument("config", help='e.g. "[(2,3).(2,4).(3,5)]" or "[(2,2)^3]", or a file holding one')
    f.add_argument("--brute-force", action="store_true", help="check all 4^K sub-ICs")
    f.add_argument("--json", action="store_true")
    f.set_defaults(func=cmd_feasibility)

    a = sub.add_parser("allocate", help="compute an incomplete CSIT allocation")
    a.add_argument("config")
    a.add_argument("--mode", choices=("heuristic", "exhaustive"), default="heuristic")
    a.add_argument("--json", action="store_true")
    a.set_defaults(func=cmd_allocate)

    r = sub.add_parser("precode", help="distributed precoding on one channel draw")
    r.add_argument("config")
    r.add_argument("--alloc", required=True, help="JSON written by `allocate --json`, or 'auto'")
    r.add_argument("--mode", choices=("heuristic", "exhaustive"), default="heuristic",
                   help="antenna removal used with --alloc auto")
    r.add_argument("--seed", type=int, required=True)
    r.add_argument("--tol", type=float, default=1e-10)
    r.add_argument("--max-iter", type=int, default=5000)
    r.add_argument("--json", action="store_true")
    r.set_defaults(func=cmd_precode)

    for name, kind in (("simulate-rate", "rate"), ("simulate-feedback", "feedback")):
        s = sub.add_parser(name, help=f"run the {kind} sweep described by a spec file")
        s.add_argument("specfile")
        s.add_argument("--out", help="write <out>.csv and <out>.json")
        s.add_argument("--workers", type=int, help=f"worker processes (default ${WORKERS_ENV} or 1)")
        s.add_argument("--json", action="store_true", help="print JSON instead of CSV")
        s.set_defaults(func=lambda args, kind=kind: _simulate(args, kind))
    return p


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except EnumerationGuardError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_GUARD
    except AssertionError as e:
        print(f"internal check failed: {e}", file=sys.stderr)
        return EXIT_GUARD
    except (UsageError, ConfigParseError, ValueError, KeyError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
