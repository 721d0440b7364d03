"""Exception hierarchy for the force-noise budget.

Every error carries the process exit code the CLI maps it to.
"""

from typing import Optional


class NoiseBudgetError(Exception):
    exit_code = 3


class UsageError(NoiseBudgetError):
    exit_code = 1


class PhysicsError(NoiseBudgetError):
    exit_code = 2


class NumericalError(NoiseBudgetError):
    exit_code = 3


class ConfigError(UsageError):
    """Invalid or unknown configuration entry; `path` is the dotted location."""

    def __init__(self, message: str, path: Optional[str] = None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)
        self.message = message

    def __reduce__(self):
        return type(self), (self.message, self.path)


class RefusesGrid(UsageError):
    pass


class GridMismatch(UsageError):
    pass


class TrapUnstable(PhysicsError):
    """Radial motion is not confined (Ω_c² ≤ 2Ω_z²)."""

    def __init__(self, omega_c: float, omega_z: float):
        self.omega_c = omega_c
        self.omega_z = omega_z
        super().__init__(
            f"trap unstable: Omega_c = {omega_c:.6g} rad/s, Omega_z = {omega_z:.6g} rad/s "
            f"(requires Omega_c^2 > 2 Omega_z^2)"
        )

    def __reduce__(self):
        return type(self), (self.omega_c, self.omega_z)


class DomainError(PhysicsError):
    pass


class SingularResponse(PhysicsError):
    pass


class QuadratureSingular(PhysicsError):
    pass


class IntegrationFailure(NumericalError):
    pass


class StepTooLarge(NumericalError):
    pass


class NonFiniteState(NumericalError):
    pass


class NoFeasiblePoint(NumericalError):
    pass
