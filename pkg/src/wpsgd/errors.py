"""Exception types raised across the package."""


class WPSGDError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatchError(WPSGDError, ValueError):
    def __init__(self, expected, got, what="vector"):
        self.expected = expected
        self.got = got
        super().__init__(f"{what} dimension mismatch: expected {expected}, got {got}")


class InvalidParameterError(WPSGDError, ValueError):
    pass


class EmptyDatasetError(WPSGDError, ValueError):
    pass


class NonFiniteWeightsError(WPSGDError, FloatingPointError):
    """Raised when an update produces NaN or Inf in the model."""

    def __init__(self, iteration, node=None):
        self.iteration = iteration
        self.node = node
        where = f" on node {node}" if node is not None else ""
        super().__init__(f"non-finite model weights after iteration {iteration}{where}")


class UnbalancedWorkloadError(WPSGDError, ValueError):
    """SimuParallel SGD was asked to run with nonzero delays."""

    def __init__(self, node, delay):
        self.node = node
        self.delay = delay
        super().__init__(
            f"SimuParallel SGD requires balanced consumption; node {node} has delay {delay}"
        )


class ScheduleError(WPSGDError, ValueError):
    pass


class StepSizeError(WPSGDError, ValueError):
    """The delay engine's step-size precondition does not hold."""


class NoAdmissibleSampleError(WPSGDError, RuntimeError):
    """Every remaining sample of a delay-SGD server failed the check gate."""

    def __init__(self, server, iteration, rejections):
        self.server = server
        self.iteration = iteration
        self.rejections = rejections
        super().__init__(
            f"server {server}: no admissible sample at accepted iteration {iteration} "
            f"after {len(rejections)} consecutive rejections"
        )


class FormatError(WPSGDError, ValueError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        loc = ""
        if path is not None:
            loc += f"{path}:"
        if line is not None:
            loc += f"{line}:"
        super().__init__(f"{loc} {message}" if loc else message)


class ConfigError(WPSGDError, ValueError):
    """Configuration is invalid; ``problems`` lists every violation."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


class DegenerateConditionError(WPSGDError, ZeroDivisionError):
    """A bound or predicate has a zero denominator for the given inputs."""


class RateFitError(WPSGDError, ValueError):
    pass
