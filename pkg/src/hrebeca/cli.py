"""Command-line front end.

Exit codes: 0 safe within bounds (or no predicate given), 1 potentially
unsafe, 2 usage or model error, 3 analysis error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .frontend import HRebecaSyntaxError, ModelError, load_model, parse_expression
from .ha import check_containment, reach_ha, translate
from .interval import UnknownVariable
from .reach import AnalysisConfig, analyze, check_unsafe, state_json, to_dot, to_json
from .semantics import DEFAULT_NTP_BUDGET, Program, SemanticsError

log = logging.getLogger("hrebeca")

EXIT_SAFE, EXIT_UNSAFE, EXIT_USAGE, EXIT_ANALYSIS = 0, 1, 2, 3


def _positive(kind):
    def conv(text):
        v = kind(text)
        if v <= 0 if kind is float else v < 0:
            raise argparse.ArgumentTypeError(f"invalid value {text!r}")
        return v
    return conv


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hrebeca", description="Reachability analysis for Hybrid Rebeca models.")
    ap.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = ap.add_subparsers(dest="command", required=True)

    def bounds(p, need_horizon=True):
        p.add_argument("--model", required=True, type=Path, help="model source file")
        p.add_argument("--time-horizon", type=_positive(float), required=need_horizon, help="time bound")
        p.add_argument("--jump-depth", type=_positive(int), default=10, help="time-progress step bound (default 10)")
        p.add_argument("--step-size", type=_positive(float), default=0.5, help="flowpipe step size (default 0.5)")

    run = sub.add_parser("run", help="explore the state space and check a predicate")
    bounds(run)
    run.add_argument("--unsafe", metavar="EXPR", help="predicate over rebec.var names, e.g. 'hws.temp > 23'")
    run.add_argument("--emit", choices=("dot", "json", "none"), default="none", help="state-space export format")
    run.add_argument("--out", type=Path, help="write the export here instead of stdout")
    run.add_argument("--compare-ha", action="store_true", help="also run the hybrid-automaton analysis and check containment")
    run.add_argument("--seed-order", choices=("strict",), default="strict", help="deterministic exploration order")
    run.add_argument("--ntp-budget", type=_positive(int), default=DEFAULT_NTP_BUDGET,
                     help="max non-time-progress steps from one state")

    chk = sub.add_parser("check", help="parse and statically check a model")
    chk.add_argument("--model", required=True, type=Path)

    tr = sub.add_parser("translate", help="export the explored hybrid automaton as JSON")
    bounds(tr)
    tr.add_argument("--out", type=Path, help="output file (default stdout)")
    return ap


def _load(path: Path) -> Program:
    return Program(load_model(path.read_text()))


def _emit(text: str, out):
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def cmd_run(args) -> int:
    prog = _load(args.model)
    predicate = parse_expression(args.unsafe) if args.unsafe else None
    cfg = AnalysisConfig(args.time_horizon, args.jump_depth, args.step_size, args.ntp_budget)
    result = analyze(prog, cfg)
    report = {"states": result.state_count, "edges": len(result.edges),
              "wall_time": round(result.stats["wall_time"], 4), "exhausted": result.exhausted}
    code = EXIT_SAFE
    if predicate is None:
        report["verdict"] = "NoPredicate"
    else:
        witness = check_unsafe(prog, result, predicate)
        if witness is None:
            report["verdict"] = "SafeWithinBounds"
        else:
            report["verdict"] = "PotentiallyUnsafe"
            report["witness"] = state_json(witness, result.states[witness])
            code = EXIT_UNSAFE
    if args.compare_ha:
        ha = translate(prog)
        har = reach_ha(ha, cfg.horizon, cfg.jump_depth, cfg.step)
        report["containment"] = check_containment(prog, result, har, ha).as_dict()
        if report["containment"]["violations"]:
            log.warning("%d containment violation(s)", report["containment"]["violations"])
    summary = json.dumps(report, indent=1) + "\n"
    if args.emit == "none":
        sys.stdout.write(summary)
    else:
        _emit(to_dot(result) if args.emit == "dot" else to_json(result, report), args.out)
        (sys.stdout if args.out else sys.stderr).write(summary)
    return code


def cmd_check(args) -> int:
    load_model(args.model.read_text())
    print(f"{args.model}: ok")
    return EXIT_SAFE


def cmd_translate(args) -> int:
    prog = _load(args.model)
    ha = translate(prog)
    reach_ha(ha, args.time_horizon, args.jump_depth, args.step_size)
    _emit(ha.to_json() + "\n", args.out)
    return EXIT_SAFE


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return {"run": cmd_run, "check": cmd_check, "translate": cmd_translate}[args.command](args)
    except HRebecaSyntaxError as e:
        print(f"{args.model}:{e}", file=sys.stderr)
        return EXIT_USAGE
    except ModelError as e:
        for d in e.diagnostics:
            print(f"{args.model}:{d}", file=sys.stderr)
        return EXIT_USAGE
    except UnknownVariable as e:
        print(f"unknown variable in predicate: {e.args[0]}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"cannot read model: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (SemanticsError, ValueError) as e:
        print(f"analysis error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_ANALYSIS


if __name__ == "__main__":
    sys.exit(main())
