"""Exception hierarchy shared by the codec, the bench harness and the CLI."""


class DarkpointError(Exception):
    """Base class for every error raised by this package."""


class InvalidCoordinate(DarkpointError, ValueError):
    pass


class InvalidConfig(DarkpointError, ValueError):
    pass


class HeatmapTooSmall(DarkpointError, ValueError):
    pass


class InvalidHeatmap(DarkpointError, ValueError):
    pass


class HmapFormatError(DarkpointError):
    """Raised when a file is not a well-formed HMAP heatmap."""

    def __init__(self, path, reason):
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason


class RefinementFailed(DarkpointError):
    """Taylor refinement could not produce a trustworthy maximum."""


class SingularHessian(RefinementFailed):
    pass


class NonMaximizingOffset(RefinementFailed):
    pass
