"""Command-line front end.

Exit codes: 0 success, 1 invalid input, 2 infeasible problem.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .case import Case, load_case
from .control import Reduction, compute_effort_coefficients, optimal_policy, target_profile
from .coordinator import compare, format_comparison, nested_mixed_spec, run_mixed, run_two_layer, summary
from .errors import CaseError, InfeasibleError, ThermopfError
from .network import solve_opf
from .report import fmt, write_candidates, write_costs
from .thermal import assemble_system, steady_point


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="thermopf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def command(name, help_text, *flags):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--case", required=True, help="case file path, or 'case33' for the bundled case")
        p.add_argument("--out", default=".", help="output directory (default: current directory)")
        for flag in flags:
            _FLAGS[flag](p)
        return p

    command("thermal-solve", "steady-state module temperatures", "fan", "current")
    command("policy", "closed-form control effort toward a scaled target",
            "fan", "current", "target-scale", "weight", "reduction")
    command("opf", "single OPF solve; --current fixes the ESS power magnitude", "current", "horizon")
    command("two-layer", "sweep target scalings and weights through both layers",
            "fan", "current", "target-scale", "weight", "reduction", "horizon")
    command("mixed", "exhaustive (fan, current) grid search baseline", "fan", "current", "horizon")
    command("compare", "two-layer sweep, nested mixed search and their cost gap",
            "fan", "current", "target-scale", "weight", "reduction", "horizon")
    return parser


_FLAGS = {
    "fan": lambda p: p.add_argument("--fan", type=float, help="fan speed u_f (rpm)"),
    "current": lambda p: p.add_argument("--current", type=float, help="per-module current I_b (A)"),
    "target-scale": lambda p: p.add_argument("--target-scale", type=float, help="reference scaling s"),
    "weight": lambda p: p.add_argument("--weight", type=float, help="policy weight c > 0"),
    "reduction": lambda p: p.add_argument("--reduction", help="mean | lstsq | hottest | node:K"),
    "horizon": lambda p: p.add_argument("--horizon", type=int, help="OPF horizon H (steps)"),
}


def _apply_overrides(case: Case, args) -> Case:
    if getattr(args, "fan", None) is not None:
        case = replace(case, fan_speed=args.fan)
    if getattr(args, "current", None) is not None:
        if args.current < 0:
            raise CaseError(f"--current must be >= 0, got {args.current:g}")
        case = replace(case, current=args.current)
    control = case.control
    if getattr(args, "target_scale", None) is not None:
        control = replace(control, target_scale=args.target_scale)
    if getattr(args, "weight", None) is not None:
        control = replace(control, weight=args.weight)
    if getattr(args, "reduction", None) is not None:
        control = replace(control, reduction=Reduction.parse(args.reduction))
    sweep = replace(
        case.sweep,
        reduction=control.reduction,
        target_mode=control.target_mode,
        target_scalings=_with(case.sweep.target_scalings, control.target_scale),
        weights=_with(case.sweep.weights, control.weight),
    )
    case = replace(case, control=control, sweep=sweep)
    if getattr(args, "horizon", None) is not None:
        case = replace(case, grid=replace(case.grid, horizon=args.horizon))
    return case


def _with(values, extra):
    """values plus `extra` (if absent), kept in ascending order."""
    if any(abs(v - extra) <= 1e-9 for v in values):
        return tuple(values)
    return tuple(sorted((*values, extra)))


def _thermal_solve(case: Case, out: Path) -> None:
    system = assemble_system(case.geometry, case.params)
    point = steady_point(system, case.fan_speed, case.squared_current)
    path = out / "temperatures.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("module", "temperature_k"))
        for i, t in enumerate(point.temperatures, start=1):
            w.writerow((i, fmt(float(t))))
    print(f"max temperature {fmt(float(point.temperatures.max()))} K -> {path}")


def _policy(case: Case, out: Path) -> None:
    system = assemble_system(case.geometry, case.params)
    point = steady_point(system, case.fan_speed, case.squared_current)
    ctl = case.control
    target = target_profile(point, case.params.ambient, ctl.target_scale, ctl.target_mode)
    coeffs = compute_effort_coefficients(system, point, target, ctl.reduction)
    effort = optimal_policy(coeffs, ctl.weight)
    path = out / "policy.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("module", "temperature_k", "target_k", "a", "b", "reduction_weight"))
        for i in range(system.n):
            w.writerow((i + 1, *(fmt(float(v)) for v in
                                 (point.temperatures[i], target[i], coeffs.a[i], coeffs.b[i], coeffs.weights[i]))))
    print(f"reduction {ctl.reduction.label()}: a = {fmt(coeffs.reduced_a)}, b = {fmt(coeffs.reduced_b)}")
    print(f"delta_fan_rpm = {fmt(effort.delta_fan)}")
    print(f"delta_squared_current_a2 = {fmt(effort.delta_squared_current)}")


def _opf(case: Case, out: Path, fixed: bool) -> None:
    magnitude = case.ess.power_magnitude(case.squared_current) if fixed else None
    d = solve_opf(case.grid, case.ess, magnitude)
    path = out / "dispatch.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("step", "grid_import_mw", "grid_export_mw", "charge_kw", "discharge_kw",
                    "alpha_charge", "alpha_discharge", "soc_kwh", "v_min_sq", "v_max_sq"))
        for t in range(case.grid.horizon):
            w.writerow((t, *(fmt(float(v)) for v in (
                d.grid_import[t], d.grid_export[t], d.charge[t], d.discharge[t],
                d.alpha_charge[t], d.alpha_discharge[t], d.soc[t + 1], d.v[t].min(), d.v[t].max()))))
    print(f"cost grid {fmt(d.cost_grid)} $, ess {fmt(d.cost_ess)} $, total {fmt(d.total_cost)} $ -> {path}")


def _two_layer_outputs(case: Case, report, out: Path) -> None:
    ctl = case.control
    write_candidates(report.rows, out / "two_layer_candidates.csv")
    by_weight = report.select(scale=ctl.target_scale)
    write_candidates(by_weight, out / "sweep_weight.csv")
    write_candidates(report.select(weight=ctl.weight), out / "sweep_target.csv")
    write_costs(by_weight, out / "cost_vs_weight.csv")


def run(argv) -> int:
    args = _build_parser().parse_args(argv)
    case = _apply_overrides(load_case(args.case), args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if args.command == "thermal-solve":
        _thermal_solve(case, out)
    elif args.command == "policy":
        _policy(case, out)
    elif args.command == "opf":
        _opf(case, out, fixed=args.current is not None)
    elif args.command == "two-layer":
        report = run_two_layer(case)
        _two_layer_outputs(case, report, out)
        print(summary(report, case.control.target_scale))
    elif args.command == "mixed":
        report = run_mixed(case)
        write_candidates(report.rows, out / "mixed_candidates.csv")
        print(summary(report))
    elif args.command == "compare":
        two = run_two_layer(case)
        mixed = run_mixed(case, nested_mixed_spec(case.mixed, two))
        cmp = compare(two, mixed, nested=True)
        _two_layer_outputs(case, two, out)
        write_candidates(mixed.rows, out / "mixed_candidates.csv")
        text = format_comparison(cmp, two, mixed, case.control.target_scale)
        (out / "comparison.txt").write_text(text)
        print(text, end="")
    return 0


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        return run(argv)
    except (_UsageError, CaseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 2
    except ThermopfError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
