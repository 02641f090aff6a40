"""Exception types raised across the package."""

import numpy as np


class DimensionMismatch(ValueError):
    pass


class NotSymmetric(ValueError):
    pass


class NotPositiveDefinite(np.linalg.LinAlgError):
    pass


class SchurNotSpd(NotPositiveDefinite):
    """A Schur complement in the chain failed to factorize.

    ``level`` is the index j of the offending S_j (1-based, as in S_1..S_k).
    """

    def __init__(self, level, message=None):
        self.level = level
        super().__init__(message or f"Schur complement S_{level} is not positive definite")


class NoConvergence(RuntimeError):
    pass


class Breakdown(RuntimeError):
    pass


class MaxIterations(RuntimeError):
    pass


class NonPositiveFactor(ValueError):
    pass


class UnsupportedElement(ValueError):
    pass


class EmptyInactiveSet(ValueError):
    pass


class DegenerateTriangle(ValueError):
    pass
