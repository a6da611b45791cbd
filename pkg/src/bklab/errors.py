"""Exception types shared across the package.

The CLI maps these onto process exit codes, so new error conditions should
subclass one of the two roots: DomainError for bad inputs, ConvergenceError
for iterations or realizations that fail to reach tolerance.
"""


class BklabError(Exception):
    pass


class DomainError(BklabError):
    """Input outside the mathematical domain of an operation."""


class ConvergenceError(BklabError):
    """An iterative solve failed to reach its tolerance."""


class NotTGoodError(DomainError):
    """Function not adapted to the tree at the requested depth."""


class FamilyNotInSPhiError(DomainError):
    """A family element is not a distinguished set of the linearization."""


class FamilyNotMaximalError(DomainError):
    """Family misses some distinguished element entirely (maximality required)."""


class ComplexityGuardError(DomainError):
    """Requested exhaustive enumeration exceeds the configured size guard."""


class RefinementTooCoarseError(ConvergenceError):
    """Support measure cannot be realized on the requested refinement grid."""


class InfeasibleStartError(ConvergenceError):
    """No feasible starting point for the given moment constraints."""
