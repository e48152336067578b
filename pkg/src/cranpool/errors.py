"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid scenario configuration or config file; message names the offending key."""


class DimensionError(ValueError):
    """Matrix dimensions inconsistent with the scenario configuration."""


class SingularMatrixError(ValueError):
    """A log-det denominator (quantization covariance block) is not positive definite."""


class UnsupportedModeError(ValueError):
    """Requested operating mode is outside the implemented scope (e.g. multivariate with N_R > 1)."""


class InitializationError(RuntimeError):
    """Feasible initialization failed; message names the binding constraint."""


class SubproblemError(RuntimeError):
    """The convex subproblem solver returned a non-optimal status.

    ``kind`` is "status" for solver-reported failures (worth retrying on a
    different solver) and "violated" for solutions that failed the returned-
    assignment verification (ill-conditioned data; retrying rarely helps).
    """

    def __init__(self, status, detail="", kind="status"):
        self.status = status
        self.kind = kind
        super().__init__(f"subproblem solver status: {status}" + (f" ({detail})" if detail else ""))
