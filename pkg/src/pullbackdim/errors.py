"""Exception taxonomy shared across the toolkit.

The CLI maps these onto process exit codes: configuration problems exit
with 2, numerical failures (blow-up, non-convergent root finding) with 3,
and internal-consistency faults with 4.
"""


class ConfigError(ValueError):
    """A parameter or configuration file violates a documented precondition."""


class NumericalError(RuntimeError):
    """A numerical procedure failed (divergence, non-convergence, coverage)."""


class BlowupError(NumericalError):
    """Trajectory norm exceeded the blow-up ceiling.

    Carries the time and norm at which the guard tripped.
    """

    def __init__(self, t: float, norm: float, ceiling: float):
        self.t = t
        self.norm = norm
        self.ceiling = ceiling
        super().__init__(
            f"solution norm {norm:.6g} exceeded ceiling {ceiling:.6g} at t={t:.6g}"
        )


class RootConvergenceError(NumericalError):
    """Root polishing failed to certify a residual below tolerance."""


class ConsistencyError(RuntimeError):
    """An internally inconsistent state was detected (reported, never silenced)."""


EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_CONSISTENCY = 4
