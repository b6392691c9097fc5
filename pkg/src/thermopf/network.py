"""Radial distribution grid with one battery, as a LinDistFlow OPF.

Power quantities on the network side are per-unit on a 1 MVA base, so they
read directly as MW / MVAr. Battery quantities stay in kW and kWh as they are
quoted for the storage unit and are converted at the point of injection.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CaseError, ConsistencyError, InfeasibleError
from .lp import LinearProgram, SolveOutcome, solve_milp

BALANCE_TOL = 1e-7
SOC_TOL = 1e-9


@dataclass(frozen=True)
class Bus:
    id: int
    p_load: float = 0.0  # MW (p.u.)
    q_load: float = 0.0  # MVAr (p.u.)


@dataclass(frozen=True)
class Line:
    from_bus: int
    to_bus: int
    r: float  # p.u.
    x: float  # p.u.


@dataclass(frozen=True)
class Tariffs:
    """Prices in $/MWh: grid buy/sell and battery discharge/charge."""

    grid_buy: float = 30.0
    grid_sell: float = 26.0
    ess_discharge: float = 32.0
    ess_charge: float = 26.0


@dataclass(frozen=True)
class GridCase:
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    slack_bus: int = 1
    v_slack: float = 1.0  # squared p.u.
    v_min: float = 0.81  # squared p.u.
    v_max: float = 1.21  # squared p.u.
    tariffs: Tariffs = field(default_factory=Tariffs)
    horizon: int = 1
    dt: float = 5.0 / 60.0  # h

    def __post_init__(self):
        if not 0 < self.v_min < self.v_max:
            raise CaseError(f"network: need 0 < v_min^2 < v_max^2, got {self.v_min}, {self.v_max}")
        if not self.v_min <= self.v_slack <= self.v_max:
            raise CaseError(f"network: slack voltage^2 {self.v_slack} outside [{self.v_min}, {self.v_max}]")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise CaseError(f"network.horizon must be a positive integer, got {self.horizon!r}")
        if not self.dt > 0:
            raise CaseError(f"network.dt_hours must be positive, got {self.dt!r}")
        check_radial(self.buses, self.lines, self.slack_bus)

    @property
    def bus_ids(self) -> list[int]:
        return [b.id for b in self.buses]

    @property
    def total_load(self) -> float:
        return float(sum(b.p_load for b in self.buses))

    def scaled(self, factor: float) -> GridCase:
        buses = tuple(Bus(b.id, b.p_load * factor, b.q_load * factor) for b in self.buses)
        return GridCase(buses, self.lines, self.slack_bus, self.v_slack, self.v_min, self.v_max,
                        self.tariffs, self.horizon, self.dt)


def check_radial(buses, lines, slack_bus) -> None:
    """Require the line graph to be a spanning tree oriented away from the slack."""
    ids = [b.id for b in buses]
    if len(set(ids)) != len(ids):
        dup = next(i for i in ids if ids.count(i) > 1)
        raise CaseError(f"network: bus {dup} listed twice")
    known = set(ids)
    if slack_bus not in known:
        raise CaseError(f"network: slack bus {slack_bus} is missing from the bus list")
    parent = {}
    for k, ln in enumerate(lines):
        where = f"network.lines[{k}] ({ln.from_bus}-{ln.to_bus})"
        for end in (ln.from_bus, ln.to_bus):
            if end not in known:
                raise CaseError(f"{where}: unknown bus {end}")
        if ln.from_bus == ln.to_bus:
            raise CaseError(f"{where}: self loop")
        if ln.r < 0 or ln.x < 0:
            raise CaseError(f"{where}: negative impedance")
        if ln.to_bus in parent or ln.to_bus == slack_bus:
            raise CaseError(f"{where}: not radial (bus {ln.to_bus} already has a feeding line)")
        parent[ln.to_bus] = ln.from_bus
    if len(lines) != len(ids) - 1:
        raise CaseError(f"network: not radial ({len(lines)} lines for {len(ids)} buses)")
    for bus in ids:
        seen, node = set(), bus
        while node != slack_bus:
            if node in seen:
                raise CaseError(f"network: not radial (cycle through bus {node})")
            seen.add(node)
            if node not in parent:
                raise CaseError(f"network: dangling bus {bus} is not connected to slack bus {slack_bus}")
            node = parent[node]


@dataclass(frozen=True)
class EssConfig:
    bus: int = 6
    capacity: float = 66.304  # kWh
    soc_min: float = 5.0  # kWh
    soc_max: float = 66.304  # kWh
    initial_soc: float = 40.0  # kWh
    eta_charge: float = 0.95
    eta_discharge: float = 0.95
    p_charge_max: float = 60.0  # kW
    p_discharge_max: float = 60.0  # kW
    rated_voltage: float = 259.0  # V
    series_modules: int = 10
    parallel_strings: int = 4
    allow_idle: bool = True

    def __post_init__(self):
        if not 0 <= self.soc_min <= self.initial_soc <= self.soc_max <= self.capacity:
            raise CaseError("ess: need 0 <= soc_min <= initial_soc <= soc_max <= capacity")
        for name in ("eta_charge", "eta_discharge"):
            if not 0 < getattr(self, name) <= 1:
                raise CaseError(f"ess.{name} must lie in (0, 1]")
        for name in ("p_charge_max", "p_discharge_max", "rated_voltage"):
            if not getattr(self, name) > 0:
                raise CaseError(f"ess.{name} must be positive")
        if self.series_modules < 1 or self.parallel_strings < 1:
            raise CaseError("ess: series_modules and parallel_strings must be >= 1")

    def power_magnitude(self, squared_current: float) -> float:
        """Terminal power (kW) for a per-module current of sqrt(u_I) amps."""
        return self.rated_voltage * self.parallel_strings * float(np.sqrt(squared_current)) / 1000.0


class _Index:
    """Column bookkeeping for the OPF variables."""

    def __init__(self):
        self.names, self.lower, self.upper, self.binaries = [], [], [], []

    def add(self, name, lo=-np.inf, up=np.inf, binary=False) -> int:
        self.names.append(name)
        self.lower.append(lo)
        self.upper.append(up)
        if binary:
            self.binaries.append(len(self.names) - 1)
        return len(self.names) - 1


@dataclass(frozen=True, eq=False)
class OpfLayout:
    """Column positions of each variable family, indexed [t, ...]."""

    p_flow: np.ndarray
    q_flow: np.ndarray
    v: np.ndarray
    grid_import: np.ndarray
    grid_export: np.ndarray
    q_grid: np.ndarray
    charge: np.ndarray | None
    discharge: np.ndarray | None
    alpha_charge: np.ndarray | None
    alpha_discharge: np.ndarray | None
    soc: np.ndarray | None
    magnitude: float | None


@dataclass(frozen=True, eq=False)
class OpfProblem:
    lp: LinearProgram
    layout: OpfLayout
    grid: GridCase
    ess: EssConfig | None


def assemble_opf(grid: GridCase, ess: EssConfig | None = None, ess_power_magnitude: float | None = None) -> OpfProblem:
    """Build the multi-period LinDistFlow MILP.

    With ``ess_power_magnitude`` (kW) the battery either idles or moves exactly
    that much power per step; without it the power is free within its limits.
    """
    if ess_power_magnitude is not None:
        if ess is None:
            raise CaseError("a fixed ESS power magnitude needs an ESS")
        if ess_power_magnitude < 0:
            raise CaseError(f"ESS power magnitude must be >= 0, got {ess_power_magnitude:g} kW")
        limit = min(ess.p_charge_max, ess.p_discharge_max)
        if ess_power_magnitude > limit + 1e-12:
            raise InfeasibleError(
                f"ESS power magnitude {ess_power_magnitude:.6g} kW exceeds the power limit {limit:g} kW"
            )
    if ess is not None and ess.bus not in set(grid.bus_ids):
        raise CaseError(f"ess.bus {ess.bus} is not a bus of the network")

    H, nb, nl = grid.horizon, len(grid.buses), len(grid.lines)
    pos = {b.id: k for k, b in enumerate(grid.buses)}
    idx = _Index()
    p_flow = np.empty((H, nl), dtype=int)
    q_flow = np.empty((H, nl), dtype=int)
    v = np.empty((H, nb), dtype=int)
    imp, exp, qg = (np.empty(H, dtype=int) for _ in range(3))
    has_ess = ess is not None
    if has_ess:
        chg, dis, a_c, a_d, soc = (np.empty(H, dtype=int) for _ in range(5))

    for t in range(H):
        for k, ln in enumerate(grid.lines):
            p_flow[t, k] = idx.add(f"P[{t},{ln.from_bus}-{ln.to_bus}]")
            q_flow[t, k] = idx.add(f"Q[{t},{ln.from_bus}-{ln.to_bus}]")
        for k, b in enumerate(grid.buses):
            if b.id == grid.slack_bus:
                v[t, k] = idx.add(f"v[{t},{b.id}]", grid.v_slack, grid.v_slack)
            else:
                v[t, k] = idx.add(f"v[{t},{b.id}]", grid.v_min, grid.v_max)
        imp[t] = idx.add(f"import[{t}]", 0.0)
        exp[t] = idx.add(f"export[{t}]", 0.0)
        qg[t] = idx.add(f"qgrid[{t}]")
        if has_ess:
            chg[t] = idx.add(f"Pbc[{t}]", 0.0, ess.p_charge_max)
            dis[t] = idx.add(f"Pbd[{t}]", 0.0, ess.p_discharge_max)
            a_c[t] = idx.add(f"alpha_bc[{t}]", 0.0, 1.0, binary=True)
            a_d[t] = idx.add(f"alpha_bd[{t}]", 0.0, 1.0, binary=True)
            soc[t] = idx.add(f"E[{t + 1}]", ess.soc_min, ess.soc_max)
            # slacks turning the three inequalities into equality rows
            idx.add(f"slack_bc[{t}]", 0.0)
            idx.add(f"slack_bd[{t}]", 0.0)
            idx.add(f"slack_mode[{t}]", 0.0, 1.0)

    n = len(idx.names)
    rows, rhs, labels = [], [], []

    def row(label, entries, value):
        r = np.zeros(n)
        for j, coef in entries:
            r[j] += coef
        rows.append(r)
        rhs.append(value)
        labels.append(label)

    for t in range(H):
        for k, b in enumerate(grid.buses):
            p_terms, q_terms = [], []
            for li, ln in enumerate(grid.lines):
                if ln.to_bus == b.id:
                    p_terms.append((p_flow[t, li], 1.0))
                    q_terms.append((q_flow[t, li], 1.0))
                elif ln.from_bus == b.id:
                    p_terms.append((p_flow[t, li], -1.0))
                    q_terms.append((q_flow[t, li], -1.0))
            if b.id == grid.slack_bus:
                p_terms += [(imp[t], 1.0), (exp[t], -1.0)]
                q_terms.append((qg[t], 1.0))
            if has_ess and b.id == ess.bus:
                p_terms += [(dis[t], 1e-3), (chg[t], -1e-3)]
            row(f"active balance bus {b.id} step {t}", p_terms, b.p_load)
            row(f"reactive balance bus {b.id} step {t}", q_terms, b.q_load)
        for li, ln in enumerate(grid.lines):
            row(
                f"voltage drop line {ln.from_bus}-{ln.to_bus} step {t}",
                [
                    (v[t, pos[ln.to_bus]], 1.0),
                    (v[t, pos[ln.from_bus]], -1.0),
                    (p_flow[t, li], 2.0 * ln.r),
                    (q_flow[t, li], 2.0 * ln.x),
                ],
                0.0,
            )
        if has_ess:
            s_c, s_d, s_m = chg[t] + 5, chg[t] + 6, chg[t] + 7
            prev = [] if t == 0 else [(soc[t - 1], -1.0)]
            e0 = ess.initial_soc if t == 0 else 0.0
            row(f"SOC recursion step {t}", [(soc[t], 1.0), *prev, (chg[t], -ess.eta_charge * grid.dt), (dis[t], grid.dt / ess.eta_discharge)], e0)
            row(f"charge limit step {t}", [(chg[t], 1.0), (a_c[t], -ess.p_charge_max), (s_c, 1.0)], 0.0)
            row(f"discharge limit step {t}", [(dis[t], 1.0), (a_d[t], -ess.p_discharge_max), (s_d, 1.0)], 0.0)
            if ess.allow_idle:
                row(f"mode exclusivity step {t}", [(a_c[t], 1.0), (a_d[t], 1.0), (s_m, 1.0)], 1.0)
            else:
                row(f"mode exclusivity step {t}", [(a_c[t], 1.0), (a_d[t], 1.0)], 1.0)
                idx.upper[s_m] = 0.0
            if ess_power_magnitude is not None:
                row(f"fixed power magnitude step {t}", [(chg[t], 1.0), (dis[t], 1.0), (a_c[t], -ess_power_magnitude), (a_d[t], -ess_power_magnitude)], 0.0)

    tr = grid.tariffs
    cost = np.zeros(n)
    cost[imp] = tr.grid_buy * grid.dt
    cost[exp] = -tr.grid_sell * grid.dt
    if has_ess:
        cost[dis] = tr.ess_discharge * grid.dt * 1e-3
        cost[chg] = -tr.ess_charge * grid.dt * 1e-3

    lp = LinearProgram(
        cost,
        np.array(rows).reshape(len(rows), n),
        np.array(rhs),
        np.array(idx.lower),
        np.array(idx.upper),
        tuple(idx.binaries),
        tuple(idx.names),
        tuple(labels),
    )
    layout = OpfLayout(
        p_flow, q_flow, v, imp, exp, qg,
        chg if has_ess else None,
        dis if has_ess else None,
        a_c if has_ess else None,
        a_d if has_ess else None,
        soc if has_ess else None,
        ess_power_magnitude,
    )
    return OpfProblem(lp, layout, grid, ess)


@dataclass(frozen=True, eq=False)
class DispatchSolution:
    """Per-step arrays have a leading time axis of length H."""

    p_flow: np.ndarray  # MW, per line
    q_flow: np.ndarray  # MVAr, per line
    v: np.ndarray  # squared p.u., per bus
    grid_import: np.ndarray  # MW
    grid_export: np.ndarray  # MW
    charge: np.ndarray  # kW
    discharge: np.ndarray  # kW
    alpha_charge: np.ndarray
    alpha_discharge: np.ndarray
    soc: np.ndarray  # kWh, length H + 1 including the initial state
    cost_grid: float
    cost_ess: float

    @property
    def total_cost(self) -> float:
        return self.cost_grid + self.cost_ess

    @property
    def grid_exchange(self) -> np.ndarray:
        return self.grid_import - self.grid_export


def _verdict(outcome: SolveOutcome, problem: OpfProblem) -> str:
    if outcome.infeasible_row is not None:
        return f"OPF is {outcome.status} (violated: {problem.lp.row_name(outcome.infeasible_row)})"
    return f"OPF is {outcome.status}"


def extract_solution(outcome: SolveOutcome, problem: OpfProblem) -> DispatchSolution:
    """Unpack an optimal outcome and re-verify every dispatch invariant."""
    if not outcome.optimal:
        raise InfeasibleError(_verdict(outcome, problem))
    grid, ess, lay = problem.grid, problem.ess, problem.layout
    x = outcome.values
    H = grid.horizon
    resid = problem.lp.a_eq @ x - problem.lp.b_eq
    worst = int(np.argmax(np.abs(resid))) if resid.size else 0
    if resid.size and abs(resid[worst]) > BALANCE_TOL:
        raise ConsistencyError(f"OPF {problem.lp.row_name(worst)} violated by {resid[worst]:.3e}")

    if ess is not None:
        a_c = np.round(x[lay.alpha_charge])
        a_d = np.round(x[lay.alpha_discharge])
        chg = np.where(a_c > 0, x[lay.charge], 0.0)
        dis = np.where(a_d > 0, x[lay.discharge], 0.0)
        soc = np.concatenate([[ess.initial_soc], x[lay.soc]])
        if np.any(a_c + a_d > 1):
            raise ConsistencyError("charging and discharging are both active in one step")
        if np.any(chg > a_c * ess.p_charge_max + 1e-9) or np.any(dis > a_d * ess.p_discharge_max + 1e-9):
            raise ConsistencyError("ESS power exceeds the limit allowed by its mode binary")
        drift = soc[1:] - soc[:-1] - (chg * ess.eta_charge - dis / ess.eta_discharge) * grid.dt
        if np.max(np.abs(drift)) > SOC_TOL:
            raise ConsistencyError(f"SOC recursion violated by {np.max(np.abs(drift)):.3e} kWh")
    else:
        a_c = a_d = chg = dis = np.zeros(H)
        soc = np.zeros(H + 1)

    tr = grid.tariffs
    imp, exp = x[lay.grid_import], x[lay.grid_export]
    cost_grid = float(np.sum(grid.dt * (tr.grid_buy * imp - tr.grid_sell * exp)))
    cost_ess = float(np.sum(grid.dt * 1e-3 * (tr.ess_discharge * dis - tr.ess_charge * chg)))
    if abs(cost_grid + cost_ess - outcome.objective_value) > 1e-7 * max(1.0, abs(outcome.objective_value)):
        raise ConsistencyError("reported objective does not match the recomputed cost")
    return DispatchSolution(
        p_flow=x[lay.p_flow],
        q_flow=x[lay.q_flow],
        v=x[lay.v],
        grid_import=imp,
        grid_export=exp,
        charge=chg,
        discharge=dis,
        alpha_charge=a_c,
        alpha_discharge=a_d,
        soc=soc,
        cost_grid=cost_grid,
        cost_ess=cost_ess,
    )


def solve_opf(grid: GridCase, ess: EssConfig | None = None, ess_power_magnitude: float | None = None) -> DispatchSolution:
    problem = assemble_opf(grid, ess, ess_power_magnitude)
    outcome = solve_milp(problem.lp)
    if not outcome.optimal:
        raise InfeasibleError(_verdict(outcome, problem))
    return extract_solution(outcome, problem)
