"""Exception hierarchy shared across the package."""


class LayoutDiffError(Exception):
    """Base class for domain errors (CLI maps these to exit code 1)."""


class GraphParseError(LayoutDiffError):
    """Raised when a graph document is malformed or semantically invalid.

    Carries the 1-based line/column of the offending construct when the
    source position is known.
    """

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}, column {column}: {message}"
        super().__init__(message)


class UnsatisfiableGraphError(LayoutDiffError):
    """Rejection sampling exhausted its attempt budget.

    ``edges`` lists the constraint set that could not be satisfied jointly.
    """

    def __init__(self, message, edges=()):
        super().__init__(message)
        self.edges = tuple(edges)


class MissingDenoiserError(LayoutDiffError):
    """A graph references a relation type absent from the checkpoint."""

    def __init__(self, relation):
        self.relation = relation
        super().__init__(f"no trained denoiser for relation '{relation}'")


class CheckpointFormatError(LayoutDiffError):
    """Checkpoint header/payload mismatch or corruption."""


class UnresolvableSizeError(LayoutDiffError):
    """Planner could not estimate a size for an object."""


class PlannerTransportError(LayoutDiffError):
    """Remote planner endpoint unreachable or HTTP-level failure."""


class PlannerResponseError(LayoutDiffError):
    """Remote planner returned a malformed document."""


class PlannerValidationError(LayoutDiffError):
    """Remote planner returned a well-formed but invalid plan.

    ``conflicts`` carries the ConflictReport when the failure is relational.
    """

    def __init__(self, message, conflicts=None):
        super().__init__(message)
        self.conflicts = conflicts
