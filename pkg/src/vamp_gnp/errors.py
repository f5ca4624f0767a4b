"""Exception types shared across the solver and the benchmark harness."""


class RankDeficiencyError(ValueError):
    """Measurement matrix does not have full row rank."""


class OracleFailure(RuntimeError):
    """A reference computation (quadrature or dense conditioning) did not converge."""


class DivergenceError(RuntimeError):
    """Solver produced a non-finite message.

    Carries the iteration index at which the failure was detected and the
    per-iteration trace collected up to that point.
    """

    def __init__(self, iteration, trace, detail=""):
        msg = f"solver diverged at iteration {iteration}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.iteration = iteration
        self.trace = trace


class DegenerateConfigError(ValueError):
    """Problem generator exhausted its retry budget without a usable draw."""
