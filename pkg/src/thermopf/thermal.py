"""Steady-state lumped thermal network for a row of battery modules.

Each module is one node. Neighbouring modules exchange heat by conduction
through the shared contact face; every module loses heat by convection through
its two lateral faces, and the two end modules also through their exposed
contact face. The top is insulated and the rack floor is adiabatic.

With the ambient temperature appended to the state, the nodal balances read

    B(u_f) @ [T; T_a] = u_I * (R0 + alpha * T)

where B(u_f) = B0 + K * u_f is N x (N + 1), because the convection coefficient
is affine in fan speed: h(u_f) = h0 * (1 + lam * (u_f - u_f0)).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CaseError, ConsistencyError, PhysicalityError, ThermalRunawayError

RESIDUAL_TOL = 1e-9  # W


@dataclass(frozen=True)
class RackGeometry:
    """Module row geometry. Areas in m^2, lengths in m.

    The defaults describe a 0.15 m x 0.45 m x 0.23 m module (width x depth x
    height). Only the height is a published figure; width and depth are
    assumptions.
    """

    n_modules: int = 10
    length: float = 0.45
    contact_face_area: float = 0.0345
    side_face_area: float = 0.1035

    def __post_init__(self):
        if int(self.n_modules) != self.n_modules or self.n_modules < 2:
            raise CaseError(f"thermal.n_modules must be an integer >= 2, got {self.n_modules!r}")
        for name in ("length", "contact_face_area", "side_face_area"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise CaseError(f"thermal.{name} must be positive, got {value!r}")

    @property
    def convection_areas(self) -> np.ndarray:
        """Convective area per node: 2*A2, plus A1 on both end modules."""
        areas = np.full(self.n_modules, 2.0 * self.side_face_area)
        areas[0] += self.contact_face_area
        areas[-1] += self.contact_face_area
        return areas


@dataclass(frozen=True)
class ThermalParams:
    k_b: float = 205.0  # W/(m K)
    h0: float = 5.0  # W/(m^2 K)
    lam: float = 0.01814  # 1/rpm
    u_f0: float = 0.0  # rpm
    ambient: float = 308.0  # K
    r_ref: float = 0.1  # ohm
    alpha_T: float = 0.004  # 1/K
    t_ref: float = 298.15  # K

    def __post_init__(self):
        checks = {
            "k_b": self.k_b > 0,
            "h0": self.h0 > 0,
            "lam": self.lam >= 0,
            "r_ref": self.r_ref > 0,
            "ambient": self.ambient > 0,
            "alpha_T": self.alpha_T >= 0,
            "t_ref": self.t_ref > 0,
        }
        for name, ok in checks.items():
            value = getattr(self, name)
            if not ok or not np.isfinite(value):
                raise CaseError(f"thermal.{name} out of range: {value!r}")
        if not np.isfinite(self.u_f0):
            raise CaseError(f"thermal.u_f0 must be finite, got {self.u_f0!r}")
        # alpha >= 0, so positivity at ambient covers every T >= T_a
        if self.r0 + self.alpha * self.ambient <= 0:
            raise CaseError("thermal: module resistance is non-positive at ambient temperature")

    @property
    def r0(self) -> float:
        """Resistance intercept R0 = R_ref * (1 - alpha_T * T_ref)."""
        return self.r_ref * (1.0 - self.alpha_T * self.t_ref)

    @property
    def alpha(self) -> float:
        """Resistance slope alpha = alpha_T * R_ref (ohm/K)."""
        return self.alpha_T * self.r_ref

    def convection(self, fan_speed: float) -> float:
        return self.h0 * (1.0 + self.lam * (fan_speed - self.u_f0))


def module_resistance(params: ThermalParams, temperature):
    """Module resistance R0 + alpha*T; accepts scalars or arrays."""
    return params.r0 + params.alpha * np.asarray(temperature, dtype=float)[()]


@dataclass(frozen=True, eq=False)
class ThermalSystem:
    geometry: RackGeometry
    params: ThermalParams
    b0: np.ndarray
    k_mat: np.ndarray
    conduction_coupling: float

    @property
    def n(self) -> int:
        return self.geometry.n_modules

    def matrix(self, fan_speed: float) -> np.ndarray:
        """B(u_f) = B0 + K*u_f, shape (N, N+1)."""
        return self.b0 + self.k_mat * fan_speed

    def effort_matrix(self, fan_speed: float, squared_current: float) -> np.ndarray:
        """M = B0 + K*u_f - alpha*u_I*[I | 0], shape (N, N+1)."""
        m = self.matrix(fan_speed)
        m[:, : self.n] -= self.params.alpha * squared_current * np.eye(self.n)
        return m

    def augment(self, temperatures) -> np.ndarray:
        return np.append(np.asarray(temperatures, dtype=float), self.params.ambient)


@dataclass(frozen=True, eq=False)
class OperatingPoint:
    fan_speed: float
    squared_current: float
    temperatures: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.squared_current < 0:
            raise PhysicalityError(f"squared current must be >= 0, got {self.squared_current!r}")
        temps = np.array(self.temperatures, dtype=float)
        temps.setflags(write=False)
        object.__setattr__(self, "temperatures", temps)

    @property
    def current(self) -> float:
        return float(np.sqrt(self.squared_current))


def assemble_system(geometry: RackGeometry, params: ThermalParams) -> ThermalSystem:
    n = geometry.n_modules
    kc = params.k_b * geometry.contact_face_area / geometry.length
    areas = geometry.convection_areas

    conduction = np.zeros((n, n + 1))
    for i in range(n):
        for j in (i - 1, i + 1):
            if 0 <= j < n:
                conduction[i, i] += kc
                conduction[i, j] -= kc

    pattern = np.zeros((n, n + 1))
    pattern[np.arange(n), np.arange(n)] = areas
    pattern[:, n] = -areas

    # h(u_f) = h0*(1 - lam*u_f0) + h0*lam*u_f splits into the fixed and fan parts
    b0 = conduction + params.h0 * (1.0 - params.lam * params.u_f0) * pattern
    k_mat = params.h0 * params.lam * pattern
    b0.setflags(write=False)
    k_mat.setflags(write=False)
    return ThermalSystem(geometry, params, b0, k_mat, kc)


def _check_physical(system: ThermalSystem, fan_speed: float, squared_current: float) -> None:
    h = system.params.convection(fan_speed)
    if not h > 0:
        raise PhysicalityError(
            f"convection coefficient h({fan_speed:g} rpm) = {h:g} W/m^2K is not positive"
        )
    if squared_current < 0:
        raise PhysicalityError(f"squared current must be >= 0, got {squared_current:g}")


def solve_steady_state(system: ThermalSystem, fan_speed: float, squared_current: float) -> np.ndarray:
    """Steady temperatures (K) of every module at the given fan speed and I^2.

    Raises ThermalRunawayError when the reduced matrix loses strict diagonal
    dominance, i.e. when alpha*u_I reaches the convective conductance of some
    node and the resistive feedback can no longer be balanced.
    """
    _check_physical(system, fan_speed, squared_current)
    p = system.params
    n = system.n
    m = system.effort_matrix(fan_speed, squared_current)[:, :n]

    diag = np.diag(m)
    off = np.abs(m).sum(axis=1) - np.abs(diag)
    bad = np.flatnonzero((diag <= 0) | (diag - off <= 0))
    if bad.size:
        raise ThermalRunawayError(
            f"thermal runaway / model invalid: reduced matrix not diagonally dominant at "
            f"node {bad[0] + 1} (u_f={fan_speed:g} rpm, u_I={squared_current:g} A^2)"
        )

    # rows of B sum to zero, so solving for the rise above ambient is equivalent
    # and keeps the right-hand side free of large cancelling terms
    rhs = np.full(n, squared_current * (p.r0 + p.alpha * p.ambient))
    rise = np.linalg.solve(m, rhs)
    resid = rhs - m @ rise
    if np.max(np.abs(resid)) > 0.1 * RESIDUAL_TOL:
        rise += np.linalg.solve(m, resid)
    temps = p.ambient + rise

    point = OperatingPoint(fan_speed, squared_current, temps)
    worst = np.max(np.abs(balance_residual(system, point)))
    if worst > RESIDUAL_TOL:
        raise ConsistencyError(f"steady-state residual {worst:.3e} W exceeds {RESIDUAL_TOL:g} W")
    return temps


def balance_residual(system: ThermalSystem, point: OperatingPoint) -> np.ndarray:
    """Heat generated minus heat leaving, per node (W)."""
    temps = point.temperatures
    generated = point.squared_current * module_resistance(system.params, temps)
    outflow = system.matrix(point.fan_speed) @ system.augment(temps)
    return generated - outflow


def steady_point(system: ThermalSystem, fan_speed: float, squared_current: float) -> OperatingPoint:
    """Operating point with temperatures at the steady state."""
    temps = solve_steady_state(system, fan_speed, squared_current)
    return OperatingPoint(fan_speed, squared_current, temps)
