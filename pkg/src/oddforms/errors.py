"""Exception hierarchy shared by all oddforms modules."""


class OddformsError(Exception):
    """Base class for every error raised by this package."""


class StructureError(OddformsError):
    """Structural misuse: mismatched variable tables, unknown variables,
    malformed operators."""


class ParityError(OddformsError):
    """A parity constraint was violated (e.g. substituting an even
    polynomial for an odd variable)."""


class DomainError(OddformsError):
    """Input outside the mathematical domain of an operation (momentum
    dependence where functions are required, zero where nonzero is
    required, non-Lagrangian subspaces, ...)."""


class ContractError(OddformsError):
    """A declared contract failed to verify (non-symplectomorphism,
    non-Lagrangian input)."""


class UnsupportedMapError(OddformsError):
    """Coordinate map outside the supported class (Berezinian not a
    perfect square, nonlinear substitution into delta factors)."""


class SingularityError(OddformsError):
    """Non-invertible odd-odd Jacobian block."""


class ConsistencyError(OddformsError):
    """Normal-form rewriting exceeded its step budget; only reachable
    for inconsistent (non-Jacobi) bracket data."""


class DivergenceError(OddformsError):
    """An even integration direction is neither pinned by a delta factor
    nor damped by a positive Gaussian weight."""


class WavefrontError(OddformsError):
    """Delta factors with linearly dependent arguments were multiplied."""


class TransversalityError(OddformsError):
    """Lagrangian relations that do not satisfy the transversality rank
    condition were composed."""


class CompositionUndefinedError(OddformsError):
    """Morphism composition with unpinned middle directions."""


class ParseError(OddformsError):
    """Malformed definition file or expression text."""
