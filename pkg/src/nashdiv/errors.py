"""Exception types shared across the package.

Every user-facing failure mode gets its own class so callers (and the CLI)
can map failures to distinct diagnostics.
"""


class NashdivError(Exception):
    """Base class for all package errors."""


# ---- instance / file errors -------------------------------------------------

class SchemaViolation(NashdivError):
    """Input file does not match the instance schema."""


class NegativeValuation(SchemaViolation):
    """A valuation entry is negative."""


class DimensionMismatch(SchemaViolation):
    """Valuation matrix shape disagrees with the declared agents/goods."""


class DuplicateGood(SchemaViolation):
    """The same good identifier appears twice."""


# ---- feasibility / search errors -------------------------------------------

class UnsupportedConstraint(NashdivError):
    """Operation requires a constraint family it does not support."""


class NotBases(NashdivError):
    """Exchange bijection requested for sets that are not bases."""


class ExplosionGuard(NashdivError):
    """A brute-force enumeration exceeded its configured state cap."""


class EmptyFeasibleSet(NashdivError):
    """The (complete) feasible set of the instance is empty."""


# ---- market / lottery errors ------------------------------------------------

class NotStrictlyPositive(NashdivError):
    """Equilibrium computation requires strictly positive valuations."""


class ConvergenceFailure(NashdivError):
    """Equilibrium search terminated without a verified certificate.

    Carries the best certificate found so its residuals can be inspected.
    """

    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class ConstraintViolation(NashdivError):
    """A fractional allocation violates the constraint structure handed in."""


class NonBihierarchy(NashdivError):
    """A constraint structure does not split into two disjoint hierarchies."""


class MalformedCopiesAllocation(NashdivError):
    """A copies-side allocation is not one-copy-per-distinct-agent complete."""
