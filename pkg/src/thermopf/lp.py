"""Dense bounded-variable primal simplex and a binary branch-and-bound.

Problems are stated as

    minimise c @ x   s.t.   A_eq @ x = b_eq,   lower <= x <= upper,
                            x[j] in {0, 1} for j in binary_indices.

Infinite bounds are allowed. Internally every bounded variable is shifted or
mirrored onto [0, u] with u possibly infinite, so nonbasic variables sit at a
finite bound; free variables stay nonbasic at zero until they enter. Feasibility is found with a phase-one objective over
one artificial per row. Pricing is Dantzig's rule until 50 degenerate pivots
in a row, then Bland's rule for the rest of that phase.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import CaseError, NodeLimitError

PIVOT_TOL = 1e-10
FEAS_TOL = 1e-9
INT_TOL = 1e-6
DEGENERATE_SWITCH = 50

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_AT_LOWER, _AT_UPPER, _BASIC = 0, 1, 2


@dataclass(frozen=True, eq=False)
class LinearProgram:
    objective: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    binary_indices: tuple[int, ...] = ()
    names: tuple[str, ...] | None = None
    row_names: tuple[str, ...] | None = None

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float).ravel()
        n = c.size
        a = np.asarray(self.a_eq, dtype=float)
        if a.size == 0:
            a = a.reshape(0, n)
        b = np.asarray(self.b_eq, dtype=float).ravel()
        lo = np.asarray(self.lower, dtype=float).ravel()
        up = np.asarray(self.upper, dtype=float).ravel()
        if a.ndim != 2 or a.shape[1] != n:
            raise CaseError(f"a_eq has shape {a.shape}, expected (m, {n})")
        if b.size != a.shape[0]:
            raise CaseError(f"b_eq has {b.size} entries for {a.shape[0]} rows")
        if lo.size != n or up.size != n:
            raise CaseError(f"bounds have sizes {lo.size}/{up.size}, expected {n}")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise CaseError("objective and constraint data must be finite")
        if np.any(np.isnan(lo)) or np.any(np.isnan(up)) or np.any(lo == np.inf) or np.any(up == -np.inf):
            raise CaseError("invalid variable bounds")
        bad = np.flatnonzero(lo > up)
        if bad.size:
            raise CaseError(f"variable {self._name(bad[0])}: lower bound exceeds upper bound")
        binaries = tuple(sorted({int(j) for j in self.binary_indices}))
        for j in binaries:
            if not 0 <= j < n:
                raise CaseError(f"binary index {j} out of range")
            if lo[j] < 0 or up[j] > 1:
                raise CaseError(f"binary variable {self._name(j)} has bounds outside [0, 1]")
        if self.names is not None and len(self.names) != n:
            raise CaseError(f"{len(self.names)} names for {n} variables")
        if self.row_names is not None and len(self.row_names) != a.shape[0]:
            raise CaseError(f"{len(self.row_names)} row names for {a.shape[0]} rows")
        for name, value in (("objective", c), ("a_eq", a), ("b_eq", b), ("lower", lo), ("upper", up)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        object.__setattr__(self, "binary_indices", binaries)

    def _name(self, j) -> str:
        return self.names[j] if self.names is not None else f"x[{j}]"

    def row_name(self, i) -> str:
        return self.row_names[i] if self.row_names is not None else f"row {i}"

    @property
    def n_vars(self) -> int:
        return self.objective.size

    def with_bounds(self, lower, upper) -> LinearProgram:
        return replace(self, lower=lower, upper=upper)


@dataclass(frozen=True, eq=False)
class SolveOutcome:
    status: str
    values: np.ndarray
    objective_value: float
    iterations: int
    objective_trace: tuple[float, ...] = ()
    nodes: int = 0
    incumbent_trace: tuple[float, ...] = ()
    pruned_bounds: tuple[float, ...] = field(default=(), repr=False)
    infeasible_row: int | None = None

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


class _Standard:
    """Map user variables onto columns y with lower bound 0 (or free) and cap u."""

    def __init__(self, problem: LinearProgram):
        a, c = problem.a_eq, problem.objective
        lo, up = problem.lower, problem.upper
        n = problem.n_vars
        self.sign = np.ones(n)
        self.shift = np.zeros(n)
        self.u = np.full(n, np.inf)
        self.free = np.zeros(n, dtype=bool)
        for j in range(n):
            if np.isfinite(lo[j]):
                self.shift[j] = lo[j]
                self.u[j] = up[j] - lo[j]
            elif np.isfinite(up[j]):
                self.shift[j] = up[j]
                self.sign[j] = -1.0
            else:
                self.free[j] = True
        self.a = a * self.sign
        self.c = c * self.sign
        self.b = problem.b_eq - a @ self.shift
        self.offset = float(c @ self.shift)

    def recover(self, y: np.ndarray) -> np.ndarray:
        return self.shift + self.sign * y


class _Tableau:
    """Tableau B^-1 A over the structural columns only.

    Artificial variables (one per row) live in the basis as indices n + i with
    an implicit unit column; once they leave they never re-enter, so their
    tableau columns are not stored.
    """

    def __init__(self, a, b, u, free, rule):
        m, n = a.shape
        flip = b < 0
        self.a = np.where(flip[:, None], -a, a)
        self.b = np.where(flip, -b, b)
        self.t = self.a.copy()
        self.n = n
        self.u = np.concatenate([u, np.full(m, np.inf)])
        self.free = np.concatenate([free, np.zeros(m, dtype=bool)])
        self.x = np.concatenate([np.zeros(n), self.b])
        self.state = np.full(n + m, _AT_LOWER)
        self.state[n:] = _BASIC
        self.basis = np.arange(n, n + m)
        self.rule = rule
        self.iterations = 0

    def reduced_costs(self, cost):
        return cost[: self.n] - cost[self.basis] @ self.t

    def run(self, cost, trace=None, max_iter=None):
        """Pivot to optimality under `cost` (length n + m). Returns OPTIMAL or UNBOUNDED."""
        rule = self.rule
        degenerate_run = 0
        m, n = self.t.shape
        max_iter = max_iter or 50 * (m + n) + 1000
        d = self.reduced_costs(cost)
        fresh = True
        if trace is not None:
            trace.append(float(cost @ self.x))
        for it in range(max_iter):
            nonbasic = self.state[:n] != _BASIC
            movable = nonbasic & (self.u[:n] > 0)
            at_lower = self.state[:n] == _AT_LOWER
            eligible = movable & (
                (self.free[:n] & (np.abs(d) > FEAS_TOL))
                | (~self.free[:n] & at_lower & (d < -FEAS_TOL))
                | ((self.state[:n] == _AT_UPPER) & (d > FEAS_TOL))
            )
            candidates = np.flatnonzero(eligible)
            if candidates.size == 0:
                if fresh:
                    return OPTIMAL
                d, fresh = self.reduced_costs(cost), True
                continue
            if rule == "bland":
                j = int(candidates[0])
            else:
                j = int(candidates[np.argmax(np.abs(d[candidates]))])
            if self.free[j]:
                direction = -1.0 if d[j] > 0 else 1.0
            else:
                direction = 1.0 if self.state[j] == _AT_LOWER else -1.0
            step = self._step(j, direction, rule == "bland")
            if step is None:
                return UNBOUNDED
            r, t_len = step
            if r is not None:
                d = d - d[j] * self.t[r]
                d[j] = 0.0
                fresh = False
                if it % 100 == 99:
                    d, fresh = self.reduced_costs(cost), True
            self.iterations += 1
            if trace is not None:
                trace.append(float(cost @ self.x))
            if t_len < 1e-12:
                degenerate_run += 1
                if rule == "dantzig" and degenerate_run >= DEGENERATE_SWITCH:
                    rule = "bland"
            else:
                degenerate_run = 0
        raise RuntimeError("simplex iteration limit reached")

    def _step(self, j, direction, bland):
        alpha = direction * self.t[:, j]
        basis = self.basis
        xb = self.x[basis]
        ub = self.u[basis]
        has_lower = ~self.free[basis]

        ratios = np.full(alpha.size, np.inf)
        dec = (alpha > PIVOT_TOL) & has_lower
        ratios[dec] = np.maximum(xb[dec], 0.0) / alpha[dec]
        inc = (alpha < -PIVOT_TOL) & np.isfinite(ub)
        ratios[inc] = np.maximum(ub[inc] - xb[inc], 0.0) / -alpha[inc]

        t_row = ratios.min() if ratios.size else np.inf
        t_flip = self.u[j]
        if not np.isfinite(t_row) and not np.isfinite(t_flip):
            return None

        if t_flip <= t_row:
            self.x[j] += direction * t_flip
            self.x[basis] = xb - t_flip * alpha
            self.state[j] = _AT_UPPER if direction > 0 else _AT_LOWER
            return None, t_flip

        ties = np.flatnonzero(ratios <= t_row + 1e-12)
        if bland:
            r = int(ties[np.argmin(basis[ties])])
        else:
            r = int(max(ties, key=lambda i: (abs(alpha[i]), -basis[i])))
        leaving = int(basis[r])
        self.x[j] += direction * t_row
        self.x[basis] = xb - t_row * alpha
        if alpha[r] > 0:
            self.x[leaving], self.state[leaving] = 0.0, _AT_LOWER
        else:
            self.x[leaving], self.state[leaving] = self.u[leaving], _AT_UPPER
        self._pivot(r, j)
        return r, t_row

    def _pivot(self, r, j):
        t = self.t
        t[r] /= t[r, j]
        col = t[:, j].copy()
        col[r] = 0.0
        rows = np.flatnonzero(col)
        if rows.size:
            cols = np.flatnonzero(t[r])
            if cols.size < 0.5 * t.shape[1]:
                t[np.ix_(rows, cols)] -= np.outer(col[rows], t[r, cols])
            else:
                t[rows] -= np.outer(col[rows], t[r])
        t[:, j] = 0.0
        t[r, j] = 1.0
        self.basis[r] = j
        self.state[j] = _BASIC

    def drive_out_artificials(self):
        """Pivot zero-level artificials out of the basis; drop redundant rows."""
        n = self.n
        keep = []
        for r in range(len(self.basis)):
            if self.basis[r] < n:
                keep.append(r)
                continue
            row = np.abs(self.t[r])
            row[self.state[:n] == _BASIC] = 0.0
            k = int(np.argmax(row)) if row.size else 0
            if row.size and row[k] > 1e-9:
                art = int(self.basis[r])
                self._pivot(r, k)
                self.state[art] = _AT_LOWER
                self.x[art] = 0.0
                keep.append(r)
        keep = np.array(keep, dtype=int)
        self.t = self.t[keep]
        self.a = self.a[keep]
        self.b = self.b[keep]
        self.basis = self.basis[keep]
        self.u = self.u[:n]
        self.free = self.free[:n]
        self.x = self.x[:n]
        self.state = self.state[:n]

    def refresh(self):
        """Recompute basic values from the original columns to shed pivot drift."""
        if self.basis.size == 0:
            return
        n = self.n
        nonbasic = np.ones(n, dtype=bool)
        structural = self.basis[self.basis < n]
        nonbasic[structural] = False
        basis_matrix = np.zeros((self.b.size, self.basis.size))
        for k, col in enumerate(self.basis):
            if col < n:
                basis_matrix[:, k] = self.a[:, col]
            else:
                basis_matrix[col - n, k] = 1.0
        rhs = self.b - self.a[:, nonbasic] @ self.x[:n][nonbasic]
        self.x[self.basis] = np.linalg.solve(basis_matrix, rhs)


def solve_lp(problem: LinearProgram, rule: str = "dantzig") -> SolveOutcome:
    """Solve the continuous relaxation (binary restrictions are ignored)."""
    if rule not in ("dantzig", "bland"):
        raise CaseError(f"unknown pricing rule {rule!r}")
    std = _Standard(problem)
    m, n = std.a.shape
    tab = _Tableau(std.a, std.b, std.u, std.free, rule)

    phase1 = np.concatenate([np.zeros(n), np.ones(m)])
    tab.run(phase1)
    infeasibility = float(tab.x[n:].sum())
    scale = max(1.0, float(np.max(np.abs(std.b), initial=0.0)))
    if infeasibility > FEAS_TOL * scale:
        # the row whose artificial carries the most residual infeasibility
        worst = int(np.argmax(tab.x[n:]))
        return SolveOutcome(INFEASIBLE, np.full(problem.n_vars, np.nan), np.nan, tab.iterations,
                            infeasible_row=worst)

    tab.drive_out_artificials()
    tab.refresh()
    trace = []
    status = tab.run(std.c, trace=trace)
    trace = tuple(v + std.offset for v in trace)
    if status == UNBOUNDED:
        return SolveOutcome(UNBOUNDED, np.full(problem.n_vars, np.nan), -np.inf, tab.iterations, trace)
    tab.refresh()

    y = np.where(std.free, tab.x, np.clip(tab.x, 0.0, std.u))
    x = np.clip(std.recover(y), problem.lower, problem.upper)
    objective = float(problem.objective @ x)
    return SolveOutcome(OPTIMAL, x, objective, tab.iterations, trace)


def solve_milp(problem: LinearProgram, node_limit: int = 100_000, rule: str = "dantzig") -> SolveOutcome:
    """Best-first branch-and-bound over the binary variables.

    Branches on the most fractional binary (lowest index on ties). Raises
    NodeLimitError rather than return an unproven incumbent.
    """
    binaries = np.array(problem.binary_indices, dtype=int)
    root = solve_lp(problem, rule)
    if binaries.size == 0 or not root.optimal:
        return replace(root, nodes=1)

    nodes = 1
    iterations = root.iterations
    counter = 0
    heap = [(root.objective_value, counter, problem.lower, problem.upper, root)]
    best, incumbent = np.inf, None
    incumbent_trace, pruned = [], []

    while heap:
        bound, _, lo, up, outcome = heapq.heappop(heap)
        if incumbent is not None and bound >= best - FEAS_TOL * max(1.0, abs(best)):
            pruned.append(bound)
            continue
        vals = outcome.values[binaries]
        frac = np.abs(vals - np.round(vals))
        if np.all(frac <= INT_TOL):
            best, incumbent = bound, outcome
            incumbent_trace.append(bound)
            continue
        # most fractional; argmax returns the lowest position among ties
        k = int(binaries[np.argmax(frac)])
        for value in (0.0, 1.0):
            child_lo, child_up = lo.copy(), up.copy()
            child_lo[k] = child_up[k] = value
            nodes += 1
            if nodes > node_limit:
                raise NodeLimitError(f"branch-and-bound node limit {node_limit} exhausted")
            child = solve_lp(problem.with_bounds(child_lo, child_up), rule)
            iterations += child.iterations
            if not child.optimal:
                continue
            if incumbent is not None and child.objective_value >= best - FEAS_TOL * max(1.0, abs(best)):
                pruned.append(child.objective_value)
                continue
            counter += 1
            heapq.heappush(heap, (child.objective_value, counter, child_lo, child_up, child))

    if incumbent is None:
        return SolveOutcome(INFEASIBLE, np.full(problem.n_vars, np.nan), np.nan, iterations, nodes=nodes)
    return replace(
        incumbent,
        iterations=iterations,
        nodes=nodes,
        incumbent_trace=tuple(incumbent_trace),
        pruned_bounds=tuple(pruned),
    )
