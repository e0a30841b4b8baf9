"""Exception hierarchy shared across the package.

Every domain failure derives from ChainError so callers (and the CLI)
can distinguish domain errors from programming errors.
"""


class ChainError(Exception):
    """Base class for all domain errors raised by this package."""


# -- matrix / vector construction -------------------------------------------

class NonSquare(ChainError):
    pass


class NegativeEntry(ChainError):
    pass


class RowSumViolation(ChainError):
    pass


class NonFinite(ChainError):
    pass


class AlphaOutOfRange(ChainError):
    pass


class InvalidDistribution(ChainError):
    pass


class DimensionMismatch(ChainError):
    pass


class SizeExceeded(ChainError):
    pass


# -- spectral ----------------------------------------------------------------

class EmptyHeadList(ChainError):
    pass


class ConvergenceFailure(ChainError):
    pass


class NonPositiveMatrix(ChainError):
    pass


# -- attention operations ----------------------------------------------------

class IndexOutOfRange(ChainError):
    pass


class InvalidWeights(ChainError):
    pass


class AllTokensMasked(ChainError):
    pass


class MissingGrid(ChainError):
    pass


class MissingSpecialTokens(ChainError):
    pass


# -- file I/O ----------------------------------------------------------------

class ParseError(ChainError):
    pass


class SchemaViolation(ChainError):
    pass


class MissingFile(ChainError):
    pass


# the array-format failures specialize ParseError so callers that only
# care about "this file is unreadable" can catch the parent

class BadMagic(ParseError):
    pass


class UnsupportedVersion(ParseError):
    pass


class UnsupportedDtype(ParseError):
    pass


class FortranOrderUnsupported(ParseError):
    pass


class TruncatedData(ParseError):
    pass


class GridMismatch(ChainError):
    pass
