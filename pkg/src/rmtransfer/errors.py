"""Error types shared across the package.

The asymptotic formulas are only defined inside a valid high-dimensional
regime; instead of letting NaNs poison a sweep, every guard raises a
distinct exception so callers can flag the offending grid point and move on.
"""


class RegimeError(ValueError):
    """Parameters outside the regime where the asymptotic formulas hold.

    Raised for h <= 0 or h_tilde <= 0, a nonpositive predicted variance,
    or a nonpositive baseline variance in the multi-source objective.
    """


class DegenerateSpecError(ValueError):
    """A closed form is undefined for this spec (zero denominator,
    undefined worst-case scaling, non positive definite curvature)."""


class ConvergenceError(RuntimeError):
    """Iterative solver exhausted its budget.

    The best iterate found so far is attached as ``best`` together with
    its residual norm as ``residual``.
    """

    def __init__(self, message, best=None, residual=None):
        super().__init__(message)
        self.best = best
        self.residual = residual
