"""Exception types raised across the package."""


class DiagramBenchError(Exception):
    pass


class ResampleLimitExceeded(DiagramBenchError):
    pass


class DegenerateLayout(DiagramBenchError):
    pass


class MissingPosition(DiagramBenchError):
    pass


class UnsupportedElement(DiagramBenchError):
    pass


class InsufficientDistinctGraphs(DiagramBenchError):
    pass


class ExhaustedAttempts(DiagramBenchError):
    def __init__(self, message, found=0, samples=None):
        super().__init__(message)
        self.found = found
        self.samples = samples or []


class UnknownSampleId(DiagramBenchError):
    pass


class EmptyTaskData(DiagramBenchError):
    pass


class NonConvergence(DiagramBenchError):
    def __init__(self, message, grad_norm=float("nan")):
        super().__init__(message)
        self.grad_norm = grad_norm


class ZeroVector(DiagramBenchError):
    pass


class SampleError(DiagramBenchError):
    """Wraps a generation/layout/render failure with the sample index attached."""

    def __init__(self, index, cause):
        super().__init__(f"sample {index}: {type(cause).__name__}: {cause}")
        self.index = index
        self.cause = cause
