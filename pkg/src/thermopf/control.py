"""Closed-form temperature-control policy.

Linearising M T = beta around the current steady state gives, node by node,

    (K T~)_i du_f - (alpha T_i + R0) du_I = -[M (T* - T)]_i

i.e. du_f = a_i + b_i du_I. The row is overdetermined (N equations, two
unknowns), so the per-node coefficients are reduced to one line
du_f = a + b du_I before minimising du_f^2 + c du_I^2 on it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CaseError, NoConvectiveLeverageError, PhysicalityError
from .thermal import OperatingPoint, ThermalSystem, solve_steady_state

AMBIENT_GUARD = 1e-6  # K
DEGENERATE_GAP = 1e-9  # K, ten times the steady-state solver accuracy


@dataclass(frozen=True)
class Reduction:
    """How the per-node (a_i, b_i) collapse to a single line.

    kind is one of ``"mean"`` (optionally weighted), ``"node"`` (one module;
    ``index=None`` picks the hottest) or ``"lstsq"``. The least-squares line
    is the one that, for every du_I, picks the du_f minimising the summed
    squared nodal imbalance in watts; that is the mean weighted by (K T~)_i^2.
    """

    kind: str = "mean"
    index: int | None = None
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("mean", "node", "lstsq"):
            raise CaseError(f"unknown reduction {self.kind!r}")
        if self.weights is not None and (min(self.weights) < 0 or sum(self.weights) <= 0):
            raise CaseError("reduction weights must be non-negative with a positive sum")

    @classmethod
    def mean(cls, weights=None) -> Reduction:
        return cls("mean", weights=None if weights is None else tuple(float(w) for w in weights))

    @classmethod
    def node(cls, index: int | None = None) -> Reduction:
        return cls("node", index=index)

    @classmethod
    def least_squares(cls) -> Reduction:
        return cls("lstsq")

    @classmethod
    def parse(cls, text: str) -> Reduction:
        """Parse ``mean``, ``lstsq``, ``hottest`` or ``node:K`` (K is 1-based)."""
        text = text.strip().lower()
        if text == "mean":
            return cls.mean()
        if text in ("lstsq", "least_squares"):
            return cls.least_squares()
        if text == "hottest":
            return cls.node()
        if text.startswith("node:"):
            try:
                k = int(text[5:])
            except ValueError:
                raise CaseError(f"bad reduction {text!r}") from None
            if k < 1:
                raise CaseError(f"bad reduction {text!r}: node numbers start at 1")
            return cls.node(k - 1)
        raise CaseError(f"bad reduction {text!r} (expected mean, lstsq, hottest or node:K)")

    def label(self) -> str:
        if self.kind == "node":
            return "hottest" if self.index is None else f"node:{self.index + 1}"
        return self.kind

    def node_weights(self, temperatures: np.ndarray, leverage: np.ndarray) -> np.ndarray:
        n = len(temperatures)
        if self.kind == "mean":
            if self.weights is None:
                return np.ones(n)
            if len(self.weights) != n:
                raise CaseError(f"reduction needs {n} weights, got {len(self.weights)}")
            return np.asarray(self.weights, dtype=float)
        if self.kind == "node":
            idx = int(np.argmax(temperatures)) if self.index is None else self.index
            if not 0 <= idx < n:
                raise CaseError(f"reduction node {idx + 1} outside 1..{n}")
            w = np.zeros(n)
            w[idx] = 1.0
            return w
        return leverage**2


@dataclass(frozen=True, eq=False)
class EffortCoefficients:
    a: np.ndarray
    b: np.ndarray
    reduced_a: float
    reduced_b: float
    reduction: Reduction
    weights: np.ndarray


@dataclass(frozen=True)
class ControlEffort:
    delta_fan: float
    delta_squared_current: float
    weight: float


def target_profile(point: OperatingPoint, ambient: float, scale: float, mode: str = "ambient") -> np.ndarray:
    """Reference profile for a scaling factor.

    ``ambient`` mode shrinks the rise above ambient (T_a + s (T - T_a)), so
    s = 1 means no change; ``raw`` mode is plain s*T.
    """
    temps = point.temperatures
    if mode == "ambient":
        return ambient + scale * (temps - ambient)
    if mode == "raw":
        return scale * temps
    raise CaseError(f"unknown target mode {mode!r} (expected 'ambient' or 'raw')")


def compute_effort_coefficients(
    system: ThermalSystem,
    point: OperatingPoint,
    target,
    reduction: Reduction = Reduction(),
) -> EffortCoefficients:
    p = system.params
    n = system.n
    temps = point.temperatures
    target = np.asarray(target, dtype=float)
    if target.shape != (n,):
        raise CaseError(f"target must have {n} entries, got shape {target.shape}")
    if p.lam == 0:
        raise NoConvectiveLeverageError("no convective leverage: fan-speed sensitivity lambda is 0")

    m = system.effort_matrix(point.fan_speed, point.squared_current)
    # the ambient entry of the perturbation is zero, so only the module columns act
    imbalance = -(m[:, :n] @ (target - temps))
    leverage = system.k_mat @ system.augment(temps)

    weights = reduction.node_weights(temps, leverage)
    used = weights > 0
    flat = used & ~(temps > p.ambient + AMBIENT_GUARD)
    if flat.any():
        i = int(np.flatnonzero(flat)[0])
        raise NoConvectiveLeverageError(
            f"no convective leverage: module {i + 1} is at {temps[i]:.6f} K, "
            f"not above ambient {p.ambient:g} K"
        )

    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(used, imbalance / leverage, np.nan)
        b = np.where(used, (p.alpha * temps + p.r0) / leverage, np.nan)

    w = weights[used] / weights[used].sum()
    return EffortCoefficients(
        a=a,
        b=b,
        reduced_a=float(w @ a[used]),
        reduced_b=float(w @ b[used]),
        reduction=reduction,
        weights=weights,
    )


def policy_from_scalars(a: float, b: float, weight: float) -> ControlEffort:
    """Minimiser of du_f^2 + c du_I^2 subject to du_f = a + b du_I."""
    if not weight > 0:
        raise CaseError(f"control weight c must be > 0, got {weight!r}")
    if not (np.isfinite(a) and np.isfinite(b)):
        raise CaseError(f"policy coefficients must be finite, got a={a!r}, b={b!r}")
    d_current = -a * b / (b * b + weight)
    # a + b*du_I equals a - a b^2/(b^2 + c) and keeps the constraint tight
    d_fan = a + b * d_current
    return ControlEffort(float(d_fan), float(d_current), float(weight))


def optimal_policy(coeffs: EffortCoefficients, weight: float) -> ControlEffort:
    return policy_from_scalars(coeffs.reduced_a, coeffs.reduced_b, weight)


def apply_effort(system: ThermalSystem, point: OperatingPoint, effort: ControlEffort) -> OperatingPoint:
    fan = point.fan_speed + effort.delta_fan
    sq = point.squared_current + effort.delta_squared_current
    if sq < 0:
        # cutting the current to exactly zero can land a rounding error below it
        if sq >= -1e-9 * max(1.0, point.squared_current):
            sq = 0.0
        else:
            raise PhysicalityError(
                f"u_I + du_I = {sq:.6g} A^2 violates the bound u_I >= 0"
            )
    h = system.params.convection(fan)
    if not h > 0:
        raise PhysicalityError(f"h(u_f + du_f) = {h:.6g} W/m^2K violates the bound h > 0 (u_f = {fan:.6g} rpm)")
    if effort.delta_fan == 0 and effort.delta_squared_current == 0:
        return point
    return OperatingPoint(fan, sq, solve_steady_state(system, fan, sq))


def iterate_policy(
    system: ThermalSystem,
    point: OperatingPoint,
    target,
    weight: float,
    reduction: Reduction = Reduction(),
    max_iter: int = 20,
    tol: float = 0.01,
):
    """Re-apply the one-shot policy until max |T - T*| < tol.

    Returns ``(point, iterations, converged)``. Because two scalar controls
    cannot shape an arbitrary N-node profile, the loop may stall short of tol.
    """
    target = np.asarray(target, dtype=float)
    for it in range(max_iter):
        if np.max(np.abs(point.temperatures - target)) < tol:
            return point, it, True
        coeffs = compute_effort_coefficients(system, point, target, reduction)
        point = apply_effort(system, point, optimal_policy(coeffs, weight))
    return point, max_iter, bool(np.max(np.abs(point.temperatures - target)) < tol)


@dataclass(frozen=True)
class LinearizationRow:
    """One epsilon of the linearisation study.

    target_gap is max |T_new - T*|. linearization_gap is max |T_new - T_lin|,
    where T_lin is what the linearised balance predicts for the effort that was
    actually applied; it isolates the dropped dM*dT term.
    """

    epsilon: float
    target_gap: float
    linearization_gap: float
    degenerate: bool


def linearization_order(
    system: ThermalSystem,
    point: OperatingPoint,
    direction,
    epsilons,
    weight: float = 0.25,
    reduction: Reduction = Reduction(),
) -> list[LinearizationRow]:
    p = system.params
    n = system.n
    direction = np.asarray(direction, dtype=float)
    if not np.any(direction):
        raise CaseError("linearization direction must be nonzero")

    temps = point.temperatures
    m = system.effort_matrix(point.fan_speed, point.squared_current)[:, :n]
    leverage = system.k_mat @ system.augment(temps)

    rows = []
    for eps in epsilons:
        target = temps + eps * direction
        coeffs = compute_effort_coefficients(system, point, target, reduction)
        effort = optimal_policy(coeffs, weight)
        new = apply_effort(system, point, effort)
        du_f, du_i = effort.delta_fan, effort.delta_squared_current
        rhs = p.r0 * du_i - leverage * du_f + p.alpha * du_i * temps
        predicted = temps + np.linalg.solve(m, rhs)
        gap = float(np.max(np.abs(new.temperatures - target)))
        lin_gap = float(np.max(np.abs(new.temperatures - predicted)))
        rows.append(LinearizationRow(float(eps), gap, lin_gap, gap < DEGENERATE_GAP))
    return rows


def successive_ratios(values) -> list[float]:
    """values[k+1] / values[k] for a halving sequence of epsilons."""
    values = list(values)
    return [values[k + 1] / values[k] for k in range(len(values) - 1)]
