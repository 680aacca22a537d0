"""Exception types shared across the package.

The CLI maps these onto exit codes: usage problems exit 1, data/IO
problems exit 2, divergence exits 3, shape mismatches exit 4.
"""


class SymlfError(Exception):
    """Base class for all package errors."""


class DataFormatError(SymlfError):
    """A dataset file or stream could not be parsed or violates the data model.

    ``line_no`` is the 1-based line number of the offending input line when
    the problem is attributable to one.
    """

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class DivergenceError(SymlfError):
    """Training produced a non-finite value.

    Carries the iteration at which the problem was detected, the name of the
    first offending parameter block, and (when raised out of the harness) the
    partial training report accumulated so far.
    """

    def __init__(self, iteration, block, report=None):
        super().__init__(
            f"non-finite values in parameter block {block!r} at iteration {iteration}"
        )
        self.iteration = iteration
        self.block = block
        self.report = report


class ShapeMismatchError(SymlfError):
    """Artifacts disagree on dimensions (e.g. factor file vs dataset)."""


class SearchError(SymlfError):
    """Hyperparameter search could not produce a usable configuration.

    ``trace`` holds the per-configuration evaluation records gathered before
    the failure.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []
