"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """Shapes or dimensions of tensor arguments do not match."""


class UnsupportedDimension(ValueError):
    pass


class DegenerateMetric(ValueError):
    """Metric is singular or not positive definite."""


class DegenerateState(ValueError):
    """A flow state violates positivity (radii, metric coefficients, warping)."""


class InvalidLocation(ValueError):
    pass


class InvalidState(ValueError):
    pass


class InvalidConfig(ValueError):
    pass


class InvalidSample(ValueError):
    pass


class UnsupportedCheck(ValueError):
    pass
