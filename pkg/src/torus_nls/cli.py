"""Command line entry point: ``torus-nls <subcommand> [--plan FILE] [overrides]``.

Exit codes: 0 success, 2 invalid plan or arguments, 3 blow-up, 4 enumeration
budget exceeded. Every failure also prints ``{"error": {"code", "message"}}``
as one JSON line on standard error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from fractions import Fraction

from .diagnostics import exponents, nu_of_q
from .errors import BlowUpError, BudgetExceededError, InvalidInputError, PlanError, TorusNLSError
from .experiments import KINDS, ExperimentPlan, _jsonable, run_plan

EXIT_OK, EXIT_PLAN, EXIT_BLOWUP, EXIT_BUDGET = 0, 2, 3, 4

# scales used when a scan is requested without a plan file
DEFAULT_SCALES = {"increment-scan": (2, 4, 8), "strichartz-scan": (4, 8, 16)}
ORDERING_P = ("3.2", "3.5", "4", "4.5", "4.8")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise PlanError(message, code="bad_arguments")


def _floats(text: str, n: int | None = None) -> tuple:
    try:
        vals = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise PlanError(f"expected comma-separated numbers, got {text!r}") from None
    if n is not None and len(vals) != n:
        raise PlanError(f"expected {n} comma-separated numbers, got {text!r}")
    return vals


def _exact(text: str):
    """Parse p exactly when it is written as an integer or decimal."""
    try:
        f = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise PlanError(f"cannot parse p={text!r}") from None
    return int(f) if f.denominator == 1 else f


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="torus-nls", description="Defocusing NLS on rectangular 3-tori: runs and scans.")
    sub = ap.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        sp = sub.add_parser(kind)
        sp.add_argument("--plan", help="JSON plan file")
        sp.add_argument("--p", help="nonlinearity power in (3, 5)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--grid", type=int, help="modes per axis")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--torus", help='side lengths "l1,l2,l3"')
        sp.add_argument("--torus-seed", type=int, help="sample a generic torus")
        sp.add_argument("--nmax", type=int, help="Diophantine search radius")
        sp.add_argument("--scales", help='dyadic scales "4,8,16"')
        sp.add_argument("--T", type=float, help="evolution time")
        sp.add_argument("--jobs", type=int, help="concurrent cells (TORUS_NLS_JOBS overrides)")
    ex = sub.add_parser("exponents")
    ex.add_argument("--p", default="4")
    ex.add_argument("--json", action="store_true", help="print one JSON object instead of text")
    return ap


def plan_from_args(args) -> ExperimentPlan:
    if args.plan:
        plan = ExperimentPlan.load(args.plan)
        if plan.kind != args.command:
            raise PlanError(f"plan kind {plan.kind!r} does not match subcommand {args.command!r}")
    else:
        plan = ExperimentPlan(kind=args.command, scales=DEFAULT_SCALES.get(args.command, ()))
    over = {}
    if args.p is not None:
        over["p"] = float(_exact(args.p))
    for flag, key in (("seed", "seed"), ("grid", "modes_per_axis"), ("out", "out"), ("nmax", "n_max"), ("T", "T")):
        if getattr(args, flag) is not None:
            over[key] = getattr(args, flag)
    if args.torus is not None and args.torus_seed is not None:
        raise PlanError("--torus and --torus-seed are mutually exclusive")
    if args.torus is not None:
        over.update(lengths=_floats(args.torus, 3), torus_seed=None)
    if args.torus_seed is not None:
        over.update(torus_seed=args.torus_seed, lengths=None)
    if args.scales is not None:
        over["scales"] = tuple(int(x) for x in _floats(args.scales))
    try:
        return dataclasses.replace(plan, **over) if over else plan
    except InvalidInputError as exc:
        raise PlanError(str(exc)) from None


def exponent_report(p_text: str) -> dict:
    p = _exact(p_text)
    ex = exponents(p)
    rows = ex.as_dict()
    exact = {}
    for name in ("theta_p", "q0", "sigma", "gamma0", "gamma1", "growth_rational", "growth_irrational"):
        v = getattr(ex, name)
        exact[name] = str(v) if isinstance(v, Fraction) else repr(v)
    nus = {}
    for q in (Fraction(10, 3), 4, 5, 6):
        v = nu_of_q(q)
        nus[str(q)] = {"exact": str(v), "value": float(v)}
    ordering = {}
    for pt in ORDERING_P:
        e = exponents(Fraction(pt))
        ordering[pt] = bool(e.growth_irrational < e.growth_rational)
    return {"p": str(p), "values": rows, "exact": exact, "nu": nus, "ordering_irrational_below_rational": ordering}


def _print_exponents(report: dict) -> None:
    print(f"p = {report['p']}")
    for name, text in report["exact"].items():
        print(f"{name} = {text} ({report['values'][name]:.17g})")
    for i in (1, 2, 3):
        print(f"theta1_term{i} = {report['values'][f'theta1_term{i}']:.17g}")
    for q, v in report["nu"].items():
        print(f"nu({q}) = {v['exact']} ({v['value']:.17g})")
    ok = all(report["ordering_irrational_below_rational"].values())
    print(f"irrational growth exponent below rational for p in {', '.join(ORDERING_P)}: {str(ok).lower()}")


def _error(code: str, message: str) -> None:
    print(json.dumps({"error": {"code": code, "message": message}}), file=sys.stderr)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command == "exponents":
            report = exponent_report(args.p)
            if args.json:
                print(json.dumps(report, indent=2))
            else:
                _print_exponents(report)
            return EXIT_OK
        plan = plan_from_args(args)
        try:
            art = run_plan(plan, args.jobs)
        except BlowUpError as exc:
            partial = getattr(exc, "artifact", None)
            if partial is not None and plan.out:
                partial.write(plan.out)
            _error(exc.code, str(exc))
            return EXIT_BLOWUP
        if plan.out:
            art.write(plan.out)
        print(json.dumps(_jsonable(art.summary_dict()), indent=2, sort_keys=True))
        if "budget_exceeded" in art.flags:
            _error("budget_exceeded", "lattice enumeration exceeded the budget; table is partial")
            return EXIT_BUDGET
        return EXIT_OK
    except BudgetExceededError as exc:
        _error(exc.code, str(exc))
        return EXIT_BUDGET
    except (PlanError, InvalidInputError) as exc:
        _error(exc.code, str(exc))
        return EXIT_PLAN
    except TorusNLSError as exc:
        _error(exc.code, str(exc))
        return EXIT_PLAN


if __name__ == "__main__":
    sys.exit(main())
