"""Two-layer scheme and the unified (mixed) baseline.

Two-layer: for every temperature-reference scaling s and policy weight c, the
thermal layer computes the closed-form effort, the battery current it implies
fixes the ESS power magnitude, and the electrical layer solves the OPF MILP
for that magnitude. The cheapest feasible candidate wins.

Mixed: every (fan speed, current) pair on a grid is checked against the exact
steady state and the temperature cap, then priced by the same OPF.

The OPF only sees the ESS power magnitude, so its results are memoised per
magnitude within a run.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from .case import Case, MixedSpec, SweepSpec
from .control import compute_effort_coefficients, optimal_policy, apply_effort, target_profile
from .errors import ConsistencyError, EmptyFeasibleSetError, InfeasibleError, NoConvectiveLeverageError
from .network import DispatchSolution, solve_opf
from .report import NAN, CandidateRow, RunReport, best_row, cost_spread
from .thermal import assemble_system, solve_steady_state, steady_point

DOMINANCE_TOL = 1e-6  # $


class _OpfByMagnitude:
    def __init__(self, case: Case):
        self.case = case
        self.memo: dict[float, DispatchSolution | InfeasibleError] = {}

    def __call__(self, power_kw: float) -> DispatchSolution:
        if power_kw not in self.memo:
            try:
                self.memo[power_kw] = solve_opf(self.case.grid, self.case.ess, power_kw)
            except InfeasibleError as exc:
                self.memo[power_kw] = exc
        hit = self.memo[power_kw]
        if isinstance(hit, InfeasibleError):
            raise hit
        return hit


def _power_kw(case: Case, current: float) -> float:
    ess = case.ess
    return ess.rated_voltage * ess.parallel_strings * current / 1000.0


def _priced_row(case, opf, base: dict, temps, temp_max) -> CandidateRow:
    max_t = float(np.max(temps))
    power = _power_kw(case, base["current"])
    row = dict(base, max_temperature=max_t, ess_power=power)
    if max_t > temp_max:
        return CandidateRow(**row, cost_grid=NAN, cost_ess=NAN, total_cost=NAN, feasible=False,
                            note=f"max temperature {max_t:.6g} K above cap {temp_max:g} K")
    try:
        dispatch = opf(power)
    except InfeasibleError as exc:
        return CandidateRow(**row, cost_grid=NAN, cost_ess=NAN, total_cost=NAN, feasible=False, note=str(exc))
    return CandidateRow(**row, cost_grid=dispatch.cost_grid, cost_ess=dispatch.cost_ess,
                        total_cost=dispatch.total_cost, feasible=True)


def _unpriced_row(base: dict, note: str) -> CandidateRow:
    full = dict(
        dict.fromkeys(("fan_speed", "current", "delta_fan", "delta_squared_current"), NAN), **base
    )
    return CandidateRow(**full, max_temperature=NAN, ess_power=NAN, cost_grid=NAN, cost_ess=NAN,
                        total_cost=NAN, feasible=False, note=note)


def run_two_layer(case: Case, sweep: SweepSpec | None = None, temp_max: float | None = None) -> RunReport:
    """Enumerate (s, c) candidates in grid order: scalings outer, weights inner."""
    sweep = sweep or case.sweep
    temp_max = case.mixed.temp_max if temp_max is None else temp_max
    start = time.perf_counter()
    system = assemble_system(case.geometry, case.params)
    initial = steady_point(system, case.fan_speed, case.squared_current)
    opf = _OpfByMagnitude(case)

    rows = []
    for s in sweep.target_scalings:
        target = target_profile(initial, case.params.ambient, s, sweep.target_mode)
        try:
            coeffs = compute_effort_coefficients(system, initial, target, sweep.reduction)
        except NoConvectiveLeverageError as exc:
            rows.extend(_unpriced_row({"scale": s, "weight": c}, str(exc)) for c in sweep.weights)
            continue
        for c in sweep.weights:
            effort = optimal_policy(coeffs, c)
            base = {
                "scale": s,
                "weight": c,
                "delta_fan": effort.delta_fan,
                "delta_squared_current": effort.delta_squared_current,
            }
            try:
                point = apply_effort(system, initial, effort)
            except InfeasibleError as exc:
                rows.append(_unpriced_row(base, str(exc)))
                continue
            base.update(fan_speed=point.fan_speed, current=point.current)
            rows.append(_priced_row(case, opf, base, point.temperatures, temp_max))

    return RunReport("two-layer", tuple(rows), best_row(rows), time.perf_counter() - start)


def run_mixed(case: Case, spec: MixedSpec | None = None) -> RunReport:
    """Exhaustive search over the (fan speed, current) grid, fan speeds outer."""
    spec = spec or case.mixed
    start = time.perf_counter()
    system = assemble_system(case.geometry, case.params)
    opf = _OpfByMagnitude(case)
    fan0, sq0 = case.fan_speed, case.squared_current

    rows = []
    for fan in spec.fan_grid:
        for current in spec.current_grid:
            base = {
                "scale": NAN,
                "weight": NAN,
                "fan_speed": fan,
                "current": current,
                "delta_fan": fan - fan0,
                "delta_squared_current": current * current - sq0,
            }
            try:
                temps = solve_steady_state(system, fan, current * current)
            except InfeasibleError as exc:
                rows.append(_unpriced_row(base, str(exc)))
                continue
            rows.append(_priced_row(case, opf, base, temps, spec.temp_max))

    best = best_row(rows)
    if best is None:
        raise EmptyFeasibleSetError(
            f"mixed formulation: empty feasible set over {len(rows)} grid points "
            f"(temperature cap {spec.temp_max:g} K)"
        )
    return RunReport("mixed", tuple(rows), best, time.perf_counter() - start)


def nested_mixed_spec(base: MixedSpec, two_layer: RunReport) -> MixedSpec:
    """Extend a mixed grid so it contains every two-layer operating point."""
    fans = set(base.fan_grid)
    currents = set(base.current_grid)
    for r in two_layer.rows:
        if math.isfinite(r.fan_speed) and math.isfinite(r.current):
            fans.add(r.fan_speed)
            currents.add(r.current)
    return replace(base, fan_grid=tuple(sorted(fans)), current_grid=tuple(sorted(currents)))


@dataclass(frozen=True)
class Comparison:
    two_layer_best: float
    mixed_best: float
    gap: float  # two-layer best minus mixed best
    two_layer_candidates: int
    mixed_candidates: int
    two_layer_feasible: int
    mixed_feasible: int
    two_layer_seconds: float
    mixed_seconds: float
    nested: bool


def compare(two_layer: RunReport, mixed: RunReport, nested: bool = False) -> Comparison:
    """Cost gap between the two runs; with nested grids the mixed run must not lose."""
    t_best = two_layer.best.total_cost if two_layer.best else NAN
    m_best = mixed.best.total_cost if mixed.best else NAN
    gap = t_best - m_best
    if nested and two_layer.best is not None:
        if mixed.best is None or gap < -DOMINANCE_TOL:
            raise ConsistencyError(
                f"dominance violated: mixed best {m_best:.9g} exceeds two-layer best {t_best:.9g}"
            )
    return Comparison(
        two_layer_best=t_best,
        mixed_best=m_best,
        gap=gap,
        two_layer_candidates=len(two_layer.rows),
        mixed_candidates=len(mixed.rows),
        two_layer_feasible=len(two_layer.feasible_rows),
        mixed_feasible=len(mixed.feasible_rows),
        two_layer_seconds=two_layer.elapsed,
        mixed_seconds=mixed.elapsed,
        nested=nested,
    )


def _describe(row: CandidateRow | None) -> str:
    if row is None:
        return "none feasible"
    return (
        f"s={row.scale:.9g} c={row.weight:.9g} fan={row.fan_speed:.9g} rpm "
        f"I={row.current:.9g} A maxT={row.max_temperature:.9g} K cost=${row.total_cost:.9g}"
    )


def summary(report: RunReport, scale: float | None = None) -> str:
    lines = [
        f"{report.kind}: {len(report.rows)} candidates, {len(report.feasible_rows)} feasible",
        f"best: {_describe(report.best)}",
    ]
    if scale is not None:
        spread = cost_spread(report.select(scale=scale))
        lines.append(f"cost spread across weights at s={scale:.9g}: {spread:.9g}")
    return "\n".join(lines)


def format_comparison(cmp: Comparison, two_layer: RunReport, mixed: RunReport, scale: float | None = None) -> str:
    return "\n".join(
        [
            summary(two_layer, scale),
            summary(mixed),
            f"cost gap (two-layer - mixed): {cmp.gap:.9g} $",
            f"grids nested: {'yes' if cmp.nested else 'no'}"
            + (f"; dominance holds within {DOMINANCE_TOL:g} $" if cmp.nested else ""),
            f"wall clock: two-layer {cmp.two_layer_seconds:.3f} s, mixed {cmp.mixed_seconds:.3f} s",
            "",
        ]
    )
