"""Command line entry point: ``reticent run|verify|reproduce|export-virtual-values``.

Bidders are numbered from 1 on the command line, as in scenario files.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import logging
import sys

from . import verify as V
from .mechanisms import virtual_value_table
from .meta import auctioneer_posterior, by_name
from .model import make_scheme, signal_profile_probability
from .scenario_io import BUNDLED, ScenarioError, bundled, load_scenario

REPRO_TOL = 1e-9


def _parse_mask(text, n):
    if text is None or text == "all":
        return None
    if text in ("none", ""):
        return []
    try:
        picked = sorted({int(x) for x in text.split(",")})
    except ValueError:
        raise SystemExit(f"--mask must be 'all', 'none' or a comma list of bidders, got {text!r}")
    bad = [b for b in picked if not 1 <= b <= n]
    if bad:
        raise SystemExit(f"--mask names unknown bidders {bad}; bidders are 1..{n}")
    return [b - 1 for b in picked]


def _parse_strategies(specs, scenario):
    strategies = V.truthful_profile(scenario)
    for item in specs or ():
        who, sep, spec = item.partition("=")
        if not sep:
            raise SystemExit(f"--strategy expects BIDDER=SPEC, got {item!r}")
        try:
            i = int(who) - 1
        except ValueError:
            raise SystemExit(f"--strategy bidder must be an integer, got {who!r}")
        if not 0 <= i < scenario.n_bidders:
            raise SystemExit(f"--strategy bidder {who} out of range 1..{scenario.n_bidders}")
        try:
            strategies[i] = V.strategy_from_spec(scenario, i, spec)
        except (ValueError, RuntimeError) as exc:
            raise SystemExit(f"--strategy {item!r}: {exc}")
    return strategies


def _emit(text: str, out):
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _load(args):
    try:
        return load_scenario(args.scenario)
    except (ScenarioError, OSError) as exc:
        raise SystemExit(f"cannot load scenario: {exc}")


def _mechanism(args, scenario):
    try:
        return by_name(args.mechanism, scenario, regulated=args.regulated)
    except ValueError as exc:
        raise SystemExit(str(exc))


# ---------------------------------------------------------------- run

def _outcome_rows(scenario, mechanism, strategies):
    """One row per (signal profile, type profile) with positive probability."""
    sc = scenario
    rows = []
    per = [list(zip(s.scheme.weights, s.scheme.posteriors, [s.scheme.name] * len(s.scheme)))
           for s in strategies]
    for combo in itertools.product(*per):
        signals = [c[1] for c in combo]
        lam = signal_profile_probability(sc.prior, [s.scheme for s in strategies], signals)
        if lam <= 0:
            continue
        post = auctioneer_posterior(sc, signals, mechanism.regulated)
        for tprof, pr in V._type_profiles(sc):
            bids = tuple(strategies[j].report[tprof[j]] for j in range(sc.n_bidders))
            out = mechanism.outcome(bids, post)
            est = mechanism.estimated_values(bids, post)
            rows.append({
                "probability": lam * pr,
                "signals": [[round(float(v), 12) for v in s] for s in signals],
                "bids": [sc.types.supports[j][b] for j, b in enumerate(bids)],
                "estimated_values": [float(v) for v in est],
                "allocation": [float(v) for v in out.x],
                "payments": [float(v) for v in out.p],
            })
    return rows


def cmd_run(args) -> int:
    sc = _load(args)
    mech = _mechanism(args, sc)
    strategies = _parse_strategies(args.strategy, sc)
    mask = _parse_mask(args.mask, sc.n_bidders)
    if mask is not None:
        for i in range(sc.n_bidders):
            if i not in mask:
                strategies[i] = V.BidderStrategy(make_scheme("no_information", i, sc.prior),
                                                 strategies[i].report)
    utilities = [V.expected_utility(sc, mech, strategies, i) for i in range(sc.n_bidders)]
    revenue, welfare = V._expected_totals(sc, mech, strategies)
    wm = V.welfare_metrics(sc, mech)
    rows = _outcome_rows(sc, mech, strategies)
    report = {
        "scenario": sc.name,
        "mechanism": mech.name,
        "strategies": [{"bidder": i + 1, "scheme": s.scheme.name,
                        "report": [sc.types.supports[i][b] for b in s.report]}
                       for i, s in enumerate(strategies)],
        "mask": None if mask is None else [i + 1 for i in mask],
        "expected_utility": utilities,
        "expected_revenue": revenue,
        "expected_welfare": welfare,
        "max_welfare": wm["max_welfare"],
        "outcomes": rows,
        "warnings": list(mech.warnings),
    }
    if args.format == "json":
        text = json.dumps(report, indent=2)
    elif args.format == "csv":
        n = sc.n_bidders
        header = (["probability"] + [f"bid_{j + 1}" for j in range(n)]
                  + [f"value_{j + 1}" for j in range(n)] + [f"x_{j + 1}" for j in range(n)]
                  + [f"p_{j + 1}" for j in range(n)])
        text = _csv(header, [[r["probability"]] + r["bids"] + r["estimated_values"]
                             + r["allocation"] + r["payments"] for r in rows])
    else:
        lines = [f"scenario   {sc.name}", f"mechanism  {mech.name}"]
        for s in report["strategies"]:
            lines.append(f"bidder {s['bidder']}   scheme {s['scheme']}  reports {s['report']}")
        lines.append("")
        for i, u in enumerate(utilities):
            lines.append(f"expected utility, bidder {i + 1}: {u:.12g}")
        lines += [f"expected revenue:  {revenue:.12g}", f"expected welfare:  {welfare:.12g}",
                  f"max welfare:       {wm['max_welfare']:.12g}"]
        lines += [f"warning: {w}" for w in mech.warnings]
        text = "\n".join(lines)
    _emit(text, args.out)
    return 0


# ---------------------------------------------------------------- verify

def cmd_verify(args) -> int:
    sc = _load(args)
    mech = _mechanism(args, sc)
    checks = None
    if args.check:
        checks = [c.strip() for c in args.check.split(",") if c.strip()]
    family = V.DeviationFamily.build(sc, k=args.family_k, seed=args.seed)
    try:
        report = V.verify_all(sc, mech, family, checks=checks, seed=args.seed)
    except ValueError as exc:
        raise SystemExit(str(exc))
    if args.format == "json":
        text = report.to_json()
    elif args.format == "csv":
        text = _csv(["property", "status", "margin", "detail"],
                    [[p["name"], p["status"], p["margin"], p["detail"]]
                     for p in report.to_dict()["properties"]])
    else:
        text = report.to_table()
    _emit(text, args.out)
    return 0 if report.ok else 1


# ---------------------------------------------------------------- reproduce

def _repro_rows(example: int):
    """(label, printed figure, computed figure) triples for one worked example."""
    sc = bundled(f"example{example}")
    ev = by_name("expected-vickrey", sc)
    if example == 1:
        silent = V.truthful_profile(sc)
        silent[0] = V.strategy_from_spec(sc, 0, "no-info")
        return [
            ("bidder 1 utility, forced to report a state", 0.0, V.forced_report_utility(sc, ev, 0)),
            ("bidder 1 utility, silent", 0.4, V.expected_utility(sc, ev, silent, 0)),
        ]
    if example == 2:
        return [
            ("revenue, information from all bidders", 0.082, V.revenue_metrics(sc, ev)),
            ("revenue, information from no bidder", 0.1, V.revenue_metrics(sc, ev, [])),
            ("revenue, information from bidder 3 only", 0.13, V.revenue_metrics(sc, ev, [2])),
        ]
    if example == 3:
        quiet = [V.strategy_from_spec(sc, i, "no-info") for i in range(sc.n_bidders)]
        reveal = list(quiet)
        reveal[0] = V.strategy_from_spec(sc, 0, "truthful")
        return [
            ("bidder 1 utility, no information (opponents silent)", 49.5,
             V.expected_utility(sc, ev, quiet, 0)),
            ("bidder 1 utility, full revelation (opponents silent)", 49.25,
             V.expected_utility(sc, ev, reveal, 0)),
        ]
    raise SystemExit(f"no worked example {example}")


def cmd_reproduce(args) -> int:
    rows = _repro_rows(args.example)
    worst = float(max(abs(p - c) for _, p, c in rows))
    ok = bool(worst <= REPRO_TOL)
    if args.format == "json":
        text = json.dumps({"example": args.example, "ok": ok, "max_abs_error": worst,
                           "rows": [{"quantity": q, "printed": p, "computed": float(c)}
                                    for q, p, c in rows]}, indent=2)
    elif args.format == "csv":
        text = _csv(["quantity", "printed", "computed"], rows)
    else:
        width = max(len(q) for q, _, _ in rows)
        lines = [f"{'quantity':<{width}}  {'printed':>10}  {'computed':>18}"]
        lines += [f"{q:<{width}}  {p:>10.6g}  {c:>18.12g}" for q, p, c in rows]
        lines.append(f"{'match' if ok else 'MISMATCH'} (max abs error {worst:.3g})")
        text = "\n".join(lines)
    _emit(text, args.out)
    return 0 if ok else 1


# ---------------------------------------------------------------- export

def cmd_export(args) -> int:
    sc = _load(args)
    table = virtual_value_table(sc)
    labels = sc.space.labels
    rows = []
    for i, t, prof, v, phi, ironed in table.rows(sc):
        rows.append([i + 1, t, " ".join(labels[c][s] for c, s in enumerate(prof)),
                     repr(v), repr(phi), repr(ironed)])
    _emit(_csv(["bidder", "type", "profile", "value", "virtual_value", "ironed_virtual_value"], rows),
          args.out)
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reticent", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log loader notices")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, mechanism=True):
        p.add_argument("--scenario", required=True,
                       help=f"scenario JSON path or bundled name ({', '.join(BUNDLED)})")
        if mechanism:
            p.add_argument("--mechanism", default="expected-vickrey",
                           help="expected-vickrey, simulated-myerson, ... or regulated(...)")
            p.add_argument("--regulated", action="store_true", help="apply information regulation")
        p.add_argument("--out", help="write output to this file instead of stdout")

    run = sub.add_parser("run", help="evaluate one strategy profile end to end")
    common(run)
    run.add_argument("--strategy", action="append", metavar="BIDDER=SPEC",
                     help="truthful | no-info | pool:a,b|c | random:SEED[:COUNT]; repeatable")
    run.add_argument("--mask", help="bidders whose information is used: all, none or 1,3")
    run.add_argument("--format", choices=("json", "table", "csv"), default="table")
    run.set_defaults(func=cmd_run)

    ver = sub.add_parser("verify", help="run incentive and rationality checks")
    common(ver)
    ver.add_argument("--check", help=f"comma list from: {', '.join(V.CHECKS)}")
    ver.add_argument("--family-k", type=int, default=64, help="random schemes per bidder")
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--format", choices=("json", "table", "csv"), default="table")
    ver.set_defaults(func=cmd_verify)

    rep = sub.add_parser("reproduce", help="recompute a worked example's figures")
    rep.add_argument("example", type=int, choices=(1, 2, 3))
    rep.add_argument("--format", choices=("json", "table", "csv"), default="table")
    rep.add_argument("--out")
    rep.set_defaults(func=cmd_reproduce)

    exp = sub.add_parser("export-virtual-values", help="write the virtual value table as CSV")
    common(exp, mechanism=False)
    exp.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
