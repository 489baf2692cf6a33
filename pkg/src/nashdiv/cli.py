"""Command-line surface: solve, check, lottery, decompose, fuzz, fixtures.

Exit codes: 0 = success / property holds, 1 = usage or input error,
2 = a finding (failed check or fuzz violation).
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from . import fixtures as fixture_lib
from . import fuzz as fuzz_lib
from .bobw import (
    FractionalAllocation,
    bihierarchy_decompose,
    build_bihierarchy,
    ce_lottery_with_certificate,
    rationalize_allocation,
)
from .errors import NashdivError
from .fairness import (
    check_alpha_ef1,
    check_constrained_mef1,
    check_ef11,
    check_ef11_chores,
    check_ef1wc,
    check_po,
    check_po_plus,
    check_prop1,
    check_sd_ef1,
)
from .feasibility import load_problem
from .instance import (
    format_rational,
    load_allocation,
    parse_rational,
    save_allocation,
    save_instance,
)
from .mnw import solve_mnw


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _emit_json(args, payload: dict):
    if getattr(args, "json_out", None):
        Path(args.json_out).write_text(
            json.dumps(payload, indent=2, default=_jsonify) + "\n", encoding="utf-8"
        )


def _jsonify(obj):
    if isinstance(obj, Fraction):
        return format_rational(obj)
    if isinstance(obj, frozenset):
        return sorted(obj)
    raise TypeError(f"cannot serialize {type(obj)!r}")


def _alloc_payload(alloc):
    return [sorted(b) for b in alloc.bundles]


def cmd_solve(args) -> int:
    instance, fs = load_problem(_read(args.instance))
    mode = "all_optima" if args.all_optima else "one_optimum"
    result = solve_mnw(instance, fs, complete=args.complete, mode=mode, cap=args.cap)
    print(f"support size: {result.support_size}")
    print(f"nash welfare: {format_rational(result.nash_welfare)}")
    print(f"maximizers: {len(result.maximizers)}")
    for alloc in result.maximizers[: args.limit]:
        print("  " + " | ".join(",".join(sorted(b)) or "-" for b in alloc.bundles))
    _emit_json(
        args,
        {
            "support_size": result.support_size,
            "nash_welfare": result.nash_welfare,
            "maximizers": [_alloc_payload(a) for a in result.maximizers],
            "search_stats": result.search_stats,
        },
    )
    return 0


_CHECKERS = {
    "ef1": lambda inst, fs, alloc, args: check_alpha_ef1(inst, alloc, args.alpha or 1),
    "ef1wc": lambda inst, fs, alloc, args: check_ef1wc(inst, fs, alloc, args.alpha or 1),
    "sdef1": lambda inst, fs, alloc, args: check_sd_ef1(inst, alloc),
    "po": lambda inst, fs, alloc, args: check_po(inst, fs, alloc, args.universe),
    "po-plus": lambda inst, fs, alloc, args: check_po_plus(inst, fs, alloc),
    "mef1": lambda inst, fs, alloc, args: check_constrained_mef1(inst, fs, alloc),
    "prop1": lambda inst, fs, alloc, args: check_prop1(inst, alloc),
    "ef11": lambda inst, fs, alloc, args: check_ef11(inst, alloc),
    "ef11-chores": lambda inst, fs, alloc, args: check_ef11_chores(inst, alloc),
}


def cmd_check(args) -> int:
    instance, fs = load_problem(_read(args.instance))
    alloc = load_allocation(_read(args.allocation))
    alloc.validate(instance)
    report = _CHECKERS[args.property](instance, fs, alloc, args)
    verdict = "holds" if report.holds else "fails"
    alpha = f" (alpha={format_rational(report.alpha)})" if report.alpha is not None else ""
    print(f"{report.name}{alpha}: {verdict}")
    if report.witness:
        for key, value in report.witness.items():
            if hasattr(value, "bundles"):
                value = _alloc_payload(value)
            print(f"  {key}: {value}")
    _emit_json(
        args,
        {
            "property": report.name,
            "holds": report.holds,
            "alpha": report.alpha,
            "witness": {
                k: (_alloc_payload(v) if hasattr(v, "bundles") else v)
                for k, v in (report.witness or {}).items()
            },
        },
    )
    return 0 if report.holds else 2


def _lottery_payload(lottery):
    return [
        {"weight": format_rational(w), "bundles": _alloc_payload(a)}
        for w, a in lottery.entries
    ]


def cmd_lottery(args) -> int:
    instance, _fs = load_problem(_read(args.instance))
    mode = args.mode.replace("-", "_")
    result = ce_lottery_with_certificate(
        instance, mode=mode, tau=parse_rational(args.tau),
        max_iterations=args.iterations,
    )
    cert = result.certificate
    print(f"lottery support: {len(result.lottery.entries)} allocations")
    for w, alloc in result.lottery.entries:
        print(
            f"  {format_rational(w)}: "
            + " | ".join(",".join(sorted(b)) or "-" for b in alloc.bundles)
        )
    print("residuals: " + json.dumps(cert.residuals.as_floats()))
    if args.out:
        Path(args.out).write_text(
            json.dumps(_lottery_payload(result.lottery), indent=2) + "\n",
            encoding="utf-8",
        )
    if args.cert_out:
        payload = {
            "mode": cert.mode,
            "prices": {
                g: format_rational(p)
                for g, p in zip(instance.goods, cert.p.values)
            },
            "x": [[format_rational(v) for v in row] for row in cert.x.matrix],
            "residuals": cert.residuals.as_floats(),
        }
        Path(args.cert_out).write_text(
            json.dumps(payload, indent=2) + "\n", encoding="utf-8"
        )
    _emit_json(args, {"lottery": _lottery_payload(result.lottery),
                      "residuals": cert.residuals.as_floats()})
    return 0


def cmd_decompose(args) -> int:
    instance, _fs = load_problem(_read(args.instance))
    data = json.loads(_read(args.fractional))
    rows = [[parse_rational(v) for v in row] for row in data["x"]]
    x = FractionalAllocation.from_rows(instance.goods, rows, instance.supplies)
    x = rationalize_allocation(x)
    mode = args.mode.replace("-", "_")
    lottery = bihierarchy_decompose(x, build_bihierarchy(instance, x, mode))
    for w, alloc in lottery.entries:
        print(
            f"{format_rational(w)}: "
            + " | ".join(",".join(sorted(b)) or "-" for b in alloc.bundles)
        )
    if args.out:
        Path(args.out).write_text(
            json.dumps(_lottery_payload(lottery), indent=2) + "\n", encoding="utf-8"
        )
    _emit_json(args, {"lottery": _lottery_payload(lottery)})
    return 0


def cmd_fuzz(args) -> int:
    config = fuzz_lib.FuzzConfig(
        seed=args.seed,
        trials=args.trials,
        families=tuple(args.families),
        properties=tuple(args.properties or ()),
        positive=args.positive,
        complete=args.complete,
        cap=args.cap,
    )
    outcome = fuzz_lib.fuzz(config)
    print(
        f"trials: {outcome.trials_run}  skipped: {outcome.skipped}  "
        f"violations: {len(outcome.findings)}"
    )
    out_dir = Path(args.out_dir)
    written = []
    for k, finding in enumerate(outcome.findings):
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / f"counterexample-{finding.family}-{finding.trial}-{k}.json"
        from .feasibility import constraint_to_dict

        payload = {
            "property": finding.property_name,
            "instance": json.loads(
                save_instance(finding.instance, constraint_to_dict(finding.fs))
            ),
            "allocation": json.loads(save_allocation(finding.allocation)),
            "witness": {
                k2: (_alloc_payload(v) if hasattr(v, "bundles") else v)
                for k2, v in (finding.report.witness or {}).items()
            },
            "shrunk": finding.shrunk,
        }
        path.write_text(json.dumps(payload, indent=2, default=_jsonify) + "\n",
                        encoding="utf-8")
        written.append(str(path))
        print(f"  {finding.property_name} violated "
              f"({finding.family} trial {finding.trial}) -> {path}")
    _emit_json(
        args,
        {
            "trials": outcome.trials_run,
            "skipped": outcome.skipped,
            "violations": len(outcome.findings),
            "counterexamples": written,
        },
    )
    return 2 if outcome.findings else 0


def cmd_fixtures(args) -> int:
    names = [args.name] if args.name else fixture_lib.fixture_names()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in names:
        try:
            content = fixture_lib.fixture_file(name)
        except KeyError as exc:
            print(f"error: {exc.args[0]}", file=sys.stderr)
            return 1
        path = out_dir / f"{name}.json"
        path.write_text(content, encoding="utf-8")
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nashdiv",
        description="Exact constrained fair division: MNW solving, fairness "
        "checking, and CE lotteries.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="compute constrained MNW allocations")
    p.add_argument("instance")
    p.add_argument("--complete", action="store_true")
    p.add_argument("--all-optima", action="store_true")
    p.add_argument("--cap", type=int, default=2_000_000)
    p.add_argument("--limit", type=int, default=20, help="max optima to print")
    p.add_argument("--json-out")
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("check", help="verify a fairness/efficiency property")
    p.add_argument("instance")
    p.add_argument("allocation")
    p.add_argument("property", choices=sorted(_CHECKERS))
    p.add_argument("--alpha", type=parse_rational, default=None)
    p.add_argument("--universe", choices=["all_feasible", "complete_feasible"],
                   default="all_feasible")
    p.add_argument("--json-out")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("lottery", help="CE lottery for a supplies instance")
    p.add_argument("instance")
    p.add_argument("--mode", choices=["copies", "copies-balanced"], default="copies")
    p.add_argument("--tau", default="1/1000000")
    p.add_argument("--tau-prime", default="1/1000",
                   help="tolerance for downstream fractional checks")
    p.add_argument("--iterations", type=int, default=100_000)
    p.add_argument("--out")
    p.add_argument("--cert-out")
    p.add_argument("--json-out")
    p.set_defaults(fn=cmd_lottery)

    p = sub.add_parser("decompose", help="lottery-decompose a fractional allocation")
    p.add_argument("instance")
    p.add_argument("fractional", help="JSON file with an n x m 'x' matrix")
    p.add_argument("--mode", choices=["copies", "copies-balanced"], default="copies")
    p.add_argument("--out")
    p.add_argument("--json-out")
    p.set_defaults(fn=cmd_decompose)

    p = sub.add_parser("fuzz", help="randomized theorem property search")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--families", nargs="+", default=["partition"],
                   choices=list(fuzz_lib.FAMILIES))
    p.add_argument("--properties", nargs="+",
                   choices=sorted(fuzz_lib.PROPERTY_CHECKS))
    p.add_argument("--positive", action="store_true")
    p.add_argument("--complete", action="store_true")
    p.add_argument("--cap", type=int, default=2_000_000)
    p.add_argument("--out-dir", default="fuzz-findings")
    p.add_argument("--json-out")
    p.set_defaults(fn=cmd_fuzz)

    p = sub.add_parser("fixtures", help="write canonical benchmark instances")
    p.add_argument("name", nargs="?")
    p.add_argument("--out-dir", default="fixtures")
    p.set_defaults(fn=cmd_fixtures)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except NashdivError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
