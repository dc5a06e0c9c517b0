"""Exception and warning types shared across the pipeline.

Exception names match the failure conditions of the operations that raise
them; catching :class:`PipelineError` covers everything this package raises
on its own behalf.
"""


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


# ---------------------------------------------------------------------------
# mesh ingest / transforms

class OffParseError(PipelineError, ValueError):
    """Malformed OFF input. Carries the 1-based line number when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MissingHeader(OffParseError):
    pass


class CountMismatch(OffParseError):
    pass


class NonTriangleFace(OffParseError):
    pass


class IndexOutOfRange(OffParseError):
    pass


class MalformedNumber(OffParseError):
    pass


class NonPositiveScale(PipelineError, ValueError):
    pass


class InvalidParams(PipelineError, ValueError):
    pass


# ---------------------------------------------------------------------------
# spectral

class EmptyMesh(PipelineError, ValueError):
    pass


class DegenerateFace(PipelineError, ValueError):
    pass


class KTooLarge(PipelineError, ValueError):
    pass


class ConvergenceFailure(PipelineError, RuntimeError):
    pass


class InsufficientEigenvalues(PipelineError, ValueError):
    pass


class ZeroDescriptor(PipelineError, ValueError):
    pass


# ---------------------------------------------------------------------------
# coding

class SingularSystem(PipelineError, ValueError):
    pass


class IterationBudgetExceeded(PipelineError, RuntimeError):
    pass


# ---------------------------------------------------------------------------
# projection / classifier

class DimensionMismatch(PipelineError, ValueError):
    pass


class CholeskyFailure(PipelineError, RuntimeError):
    pass


class SingleClass(PipelineError, ValueError):
    pass


class EmptyClass(PipelineError, ValueError):
    pass


class NonFinite(PipelineError, ValueError):
    pass


# ---------------------------------------------------------------------------
# evaluation / persistence

class ClassTooSmall(PipelineError, ValueError):
    pass


class MissingDescriptors(PipelineError, KeyError):
    """Descriptor cache does not cover the manifest; lists absent shapes."""

    def __init__(self, names):
        self.names = tuple(names)
        super().__init__(f"no cached descriptor for: {', '.join(self.names)}")


# ---------------------------------------------------------------------------
# warnings

class NonClosedMesh(UserWarning):
    """Mesh has boundary edges; spectra are computed with natural boundary
    behavior of the cotangent weights."""


class DegenerateDataset(UserWarning):
    """All samples identical; total scatter is zero."""


class DimensionReduced(UserWarning):
    """Requested projection dimension exceeded the rank of the total
    scatter and was reduced."""
