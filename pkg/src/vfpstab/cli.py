"""Command-line entry point.

    vfpstab check       --config run.ini [--out report.txt]
    vfpstab run-kinetic --config run.ini --out records.csv
    vfpstab run-macro   --config run.ini --out sigma.csv
    vfpstab ap-sweep    --config run.ini --out sweep.csv

Exit codes: 0 success, 1 condition or validation failure, 2 usage or config error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import warnings
from pathlib import Path

from . import __version__
from .analysis import ap_study
from .boundary import FeedbackMatrix, Theorem, check_constraints
from .config import ConfigError, RunSetup, load_config
from .constants import validate_field
from .kinetic import CSV_COLUMNS, ValidationError, simulate, validate
from .macro import ConstraintError, run_macro

log = logging.getLogger("vfpstab")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _g(x) -> str:
    return "%.17g" % x


def _open_out(path):
    """Open the output early so a bad path fails before any computation."""
    if path is None or str(path) == "-":
        return sys.stdout
    try:
        return open(path, "w", newline="")
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc.strerror or exc}") from None


def _close(fh):
    if fh is not sys.stdout:
        fh.close()


def build_report(setup: RunSetup) -> tuple[dict, bool, list[str]]:
    """Condition report for the kinetic configuration: (data, passed, warnings)."""
    cfg = setup.kinetic
    fc = validate_field(cfg.field, cfg.lam, cfg.C_s)
    cr = check_constraints(cfg.K, cfg.a, epsilon=cfg.epsilon)
    consts, interval, xi, const_err = None, None, math.nan, None
    try:
        consts = cfg.constants()
        interval = consts.a_interval
        xi = consts.xi
    except ValueError as exc:
        const_err = str(exc)

    conditions = []

    def add(name, passed, residual=None, detail=""):
        conditions.append({"name": name, "passed": passed, "residual": residual,
                           "detail": detail})

    add("field bound C_E <= lambda C_s / 8", fc.passed, -fc.margin, "; ".join(fc.reasons))
    add("epsilon in (0, 1]", 0 < cfg.epsilon <= 1, None, f"epsilon = {cfg.epsilon:g}")
    add("row sums of K equal 1", cr.const2_pass, max(map(abs, cr.const2_residuals)))
    add("no-boundary-layer quadratics on K0", cr.constraint3_pass,
        max(map(abs, cr.constraint3_residuals)))
    add("stabilization profile", cr.theorem_selected is not Theorem.NONE, None,
        "; ".join(cr.profile_violations + cr.reasons))
    if const_err is not None:
        add("admissible a interval", False, None, const_err)
    else:
        add("a in admissible interval", cfg.a in interval, None,
            interval.reason or f"({interval.lower:.12g}, {interval.upper:.12g})")
        add("xi > 0", bool(xi > 0), None, f"xi = {xi:.12g}")

    # the quadratics only decide whether a layer forms; not a stability hypothesis
    required = {c["name"] for c in conditions} - {"no-boundary-layer quadratics on K0",
                                                  "row sums of K equal 1"}
    passed = all(c["passed"] for c in conditions if c["name"] in required)
    warn = list(cr.notes)
    warn += [f"{c['name']} failed" for c in conditions
             if c["name"] not in required and not c["passed"]]
    data = {
        "version": __version__,
        "theorem": cr.theorem_selected.value,
        "C_E": fc.C_E,
        "a": cfg.a,
        "epsilon": cfg.epsilon,
        "a_interval": None if interval is None else [interval.lower, interval.upper],
        "xi": None if not math.isfinite(xi) else xi,
        "conditions": conditions,
        "warnings": warn,
        "passed": passed,
    }
    return data, passed, warn


def format_report(data: dict) -> str:
    lines = ["vfpstab condition report", ""]
    for c in data["conditions"]:
        mark = "PASS" if c["passed"] else "FAIL"
        line = f"[{mark}] {c['name']}"
        if c["residual"] is not None:
            line += f"  residual {c['residual']:.6g}"
        if c["detail"]:
            line += f"  ({c['detail']})"
        lines.append(line)
    lines.append("")
    iv = data["a_interval"]
    if iv is not None:
        lines.append(f"admissible a: ({iv[0]:.12g}, {iv[1]:.12g}), a = {data['a']:g}")
    lines.append(f"xi: {data['xi']!r}" if data["xi"] is None else f"xi: {data['xi']:.12g}")
    lines.append(f"C_E: {data['C_E']:.12g}")
    lines.append(f"theorem: {data['theorem']}")
    for w in data["warnings"]:
        lines.append(f"warning: {w}")
    lines.append(f"result: {'PASS' if data['passed'] else 'FAIL'}")
    return "\n".join(lines) + "\n"


def cmd_check(args, setup: RunSetup) -> int:
    data, passed, warn = build_report(setup)
    text = format_report(data)
    if args.out:
        out = Path(args.out)
        fh = _open_out(out)
        fh.write(text)
        _close(fh)
        jpath = out.with_suffix(".json") if out.suffix != ".json" else out.with_suffix(".report.json")
        with open(jpath, "w") as fh:
            json.dump(data, fh, indent=2, sort_keys=True)
            fh.write("\n")
    if not args.quiet:
        sys.stdout.write(text)
    if not passed or (args.strict and warn):
        return EXIT_FAIL
    return EXIT_OK


def cmd_run_kinetic(args, setup: RunSetup) -> int:
    cfg = setup.kinetic
    strict = True if args.strict else None
    fh = _open_out(args.out)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            result = simulate(cfg, strict=strict)
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for rec in result.records:
            fh.write(",".join(_g(getattr(rec, c)) for c in CSV_COLUMNS) + "\n")
    finally:
        _close(fh)
    bad_equiv = [r.t for r in result.records if not r.equivalence_ok]
    if bad_equiv:
        log.warning("norm equivalence flagged at %d records", len(bad_equiv))
    for w in caught:
        log.warning("%s", w.message)
    log.info("wrote %d records, %d steps, dt = %.6g", len(result.records), result.n_steps, result.dt)
    if args.strict and (bad_equiv or caught):
        return EXIT_FAIL
    return EXIT_OK


def cmd_run_macro(args, setup: RunSetup) -> int:
    mcfg = setup.macro
    fh = _open_out(args.out)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            snaps = run_macro(mcfg)
        fh.write("t,x,sigma\n")
        x = mcfg.x_nodes
        for t, sigma in snaps:
            for xi, si in zip(x, sigma):
                fh.write(f"{_g(t)},{_g(xi)},{_g(si)}\n")
    finally:
        _close(fh)
    for w in caught:
        log.warning("%s", w.message)
    if args.strict and caught:
        return EXIT_FAIL
    return EXIT_OK


def cmd_ap_sweep(args, setup: RunSetup) -> int:
    ref = FeedbackMatrix.periodic() if setup.reference == "periodic" else None
    strict = True if args.strict else not setup.kinetic.exploratory
    base = setup.kinetic.replace(exploratory=not strict)
    fh = _open_out(args.out)
    try:
        rows = ap_study(base, setup.epsilons, reference_K0=ref,
                        margin_cells=setup.margin_cells, n_jobs=setup.jobs)
        fh.write("epsilon,l2_diff,layer_indicator,saturated\n")
        for r in rows:
            fh.write(f"{_g(r.epsilon)},{_g(r.l2_diff)},{_g(r.layer_indicator)},{int(r.saturated)}\n")
    finally:
        _close(fh)
    for r in rows:
        log.info("eps = %g: L2 difference %.6g, layer indicator %.6g", r.epsilon, r.l2_diff,
                 r.layer_indicator)
    return EXIT_OK


COMMANDS = {
    "check": cmd_check,
    "run-kinetic": cmd_run_kinetic,
    "run-macro": cmd_run_macro,
    "ap-sweep": cmd_ap_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vfpstab",
                                description="Feedback-stabilized Vlasov-Fokker-Planck runs")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "check": "report the stability conditions of a configuration",
        "run-kinetic": "run the kinetic solver and write energy records as CSV",
        "run-macro": "run the drift-diffusion solver and write (t, x, sigma) CSV",
        "ap-sweep": "compare kinetic runs over epsilon with the limit solution",
    }
    for name, text in helps.items():
        sp = sub.add_parser(name, help=text)
        sp.add_argument("--config", required=True, help="INI configuration file")
        sp.add_argument("--out", required=name != "check",
                        help="output file ('-' for stdout)")
        sp.add_argument("--strict", action="store_true",
                        help="treat any condition warning as a failure")
        sp.add_argument("--quiet", action="store_true", help="only print errors")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s: %(message)s")
    try:
        setup = load_config(args.config)
        return COMMANDS[args.command](args, setup)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValidationError, ConstraintError) as exc:
        print(f"condition failure: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
