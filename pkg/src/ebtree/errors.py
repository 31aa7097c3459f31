"""Exception types shared across the package."""


class EbTreeError(Exception):
    """Base class for all ebtree errors."""


class DimensionError(EbTreeError):
    """Vector dimensions do not agree."""


class DegenerateDataError(EbTreeError):
    """Dataset cannot support the requested operation (e.g. single class)."""


class DegenerateHyperplaneError(EbTreeError):
    """Hyperplane has a zero normal vector."""


class MissingPlaneError(EbTreeError):
    """No fitted hyperplane exists for a label present in the data."""


class NotIndexedError(EbTreeError):
    """Point id is unknown to (or already removed from) the index."""


class EmptyQueueError(EbTreeError):
    """Candidate queue is exhausted."""


class InsufficientSupportError(EbTreeError):
    """Cohort has no members to compare against."""


class EmptyInputError(EbTreeError):
    """An evaluation set or input collection is empty."""


class ParseError(EbTreeError):
    """Malformed input file.

    Carries the 1-based line number when the problem is attributable to a
    specific line.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
