"""Exception hierarchy.

Two families matter to callers: `CaseError` for bad input (the CLI maps it to
exit code 1) and `InfeasibleError` for a well-formed problem that has no
admissible answer (exit code 2).
"""


class ThermopfError(Exception):
    pass


class CaseError(ThermopfError, ValueError):
    """Malformed or inconsistent input data."""


class InfeasibleError(ThermopfError):
    pass


class ThermalRunawayError(InfeasibleError):
    """Joule heating outruns the cooling network; no physical steady state."""


class NoConvectiveLeverageError(InfeasibleError):
    """A node sits at ambient (or the fan has no effect), so the policy is undefined."""


class PhysicalityError(InfeasibleError):
    """An operating point leaves the physical range (negative u_I or h <= 0)."""


class LPInfeasibleError(InfeasibleError):
    pass


class EmptyFeasibleSetError(InfeasibleError):
    pass


class NodeLimitError(ThermopfError):
    """Branch-and-bound exhausted its node budget before proving optimality."""


class ConsistencyError(ThermopfError):
    """A returned solution violates one of its own constraints beyond tolerance."""
