"""Command-line entry point.

Exit codes: 0 all checks pass, 1 a check failed, 2 configuration error,
3 internal numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

from . import acceptance
from .config import ConfigError, builtin, load, validate
from .pipeline import run_scenario
from .report import dumps, write_csv

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

STAGE_COMMANDS = {
    "spectrum": ["spectrum"],
    "indicial": ["indicial"],
    "harmonic": ["harmonic"],
    "bochner": ["bochner"],
    "split": ["split"],
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cylends", description="Harmonic functions on manifolds with cylindrical ends.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        src = sp.add_mutually_exclusive_group()
        src.add_argument("--config", help="scenario JSON file")
        src.add_argument("--scenario", choices=["flat", "warped", "cigar"], help="built-in scenario")
        sp.add_argument("--out", help="directory for JSON/CSV output")
        sp.add_argument("--format", choices=["json", "csv", "both"], default="json")
        sp.add_argument("--filter", help="only report checks whose name contains this text")
        sp.add_argument("-v", "--verbose", action="store_true")

    for name in list(STAGE_COMMANDS) + ["run"]:
        sp = sub.add_parser(name, help=f"run the {name} stage" if name != "run" else "run the full pipeline")
        common(sp)
        if name == "harmonic":
            sp.add_argument("--C", nargs="+", type=float, help="slopes C_i, one per end")
            sp.add_argument("--D", nargs="+", type=float, help="offsets D_i (completed from ker Phi if omitted)")
            sp.add_argument("--auto-project", action="store_true", help="project (C, D) onto ker Phi")
    sp = sub.add_parser("suite", help="run the acceptance criteria")
    sp.add_argument("--config", help="JSON with tolerance overrides (scenario schema)")
    sp.add_argument("--out", help="directory for the suite report")
    sp.add_argument("--format", choices=["json", "csv", "both"], default="json")
    sp.add_argument("--filter", help="criterion number, name or tag (comma separated)")
    sp.add_argument("-v", "--verbose", action="store_true")
    return p


def _load_config(args) -> dict:
    if getattr(args, "config", None):
        return load(args.config)
    return builtin(getattr(args, "scenario", None) or "flat")


def _write(out: str | None, stem: str, report: dict, tables: dict, fmt: str) -> None:
    if not out:
        return
    os.makedirs(out, exist_ok=True)
    if fmt in ("json", "both"):
        with open(os.path.join(out, f"{stem}.json"), "w") as fh:
            fh.write(dumps(report))
    if fmt in ("csv", "both"):
        for name, (header, rows) in tables.items():
            write_csv(os.path.join(out, f"{stem}_{name}.csv"), header, rows)


def _run_stages(args) -> int:
    cfg = _load_config(args)
    if args.command in STAGE_COMMANDS:
        cfg["stages"] = STAGE_COMMANDS[args.command]
    if args.command == "harmonic":
        if args.C is not None:
            raw = {k: v for k, v in cfg.items()}
            raw["asymptotics"] = {"C": args.C, "D": args.D}
            cfg = validate(raw)
        if args.auto_project:
            cfg["auto_project"] = True
    report, extras = run_scenario(cfg)
    verdicts = extras["verdicts"]
    if args.filter:
        verdicts = [v for v in verdicts if args.filter in v.check]
        report["verdicts"] = [v.as_dict() for v in verdicts]
    print(f"scenario {cfg['name']}: {report['status']}")
    for v in verdicts:
        print("  " + v.line())
    for stage, res in report["stages"].items():
        if res["status"] != "done":
            print(f"  stage {stage}: {res['status']} ({res.get('reason') or res.get('error')})")
    print("  timings: " + ", ".join(f"{k} {t:.2f}s" for k, t in extras["timings"].items()))
    _write(args.out, cfg["name"], report, extras["tables"], args.format)
    if extras["errors"]:
        return EXIT_NUMERIC
    return EXIT_FAIL if any(v.status == "FAIL" for v in verdicts) else EXIT_OK


def _run_suite(args) -> int:
    tolerances = load(args.config)["tolerances"] if args.config else None
    selected = acceptance.select(args.filter)
    if not selected:
        raise ConfigError(f"--filter {args.filter!r} matches no criterion")
    report, results = acceptance.suite(args.filter, tolerances)
    for r in results:
        print(r.line() + f" [{r.seconds:.2f}s]")
        for v in r.verdicts:
            if v.status == "FAIL":
                print("    " + v.line())
    print(f"suite: {report['status']}")
    tables = {"criteria": (["criterion", "name", "status", "checks"],
                           [[r.number, r.name, "PASS" if r.passed else "FAIL", len(r.verdicts)] for r in results])}
    _write(args.out, "suite", report, tables, args.format)
    return EXIT_OK if report["status"] == "PASS" else EXIT_FAIL


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "suite":
            return _run_suite(args)
        return _run_stages(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, RuntimeError, ValueError, NotImplementedError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
