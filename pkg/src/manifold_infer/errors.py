"""Exception hierarchy shared by all modules."""


class ManifoldInferError(Exception):
    """Base class for every error raised by this package."""


class NonFinite(ManifoldInferError, ValueError):
    pass


class RankDeficient(ManifoldInferError, ValueError):
    pass


class AnchorMismatch(ManifoldInferError, ValueError):
    pass


class ShapeMismatch(ManifoldInferError, ValueError):
    pass


class ChartError(ManifoldInferError):
    """A point or step falls outside the domain of a chart."""


class DomainEscape(ChartError):
    """A retraction step left the retraction's domain."""


class OutOfChart(ChartError):
    """A point is not representable in the inverse-retraction chart."""


class NoConvergence(OutOfChart):
    """An iterative inverse retraction failed to converge."""


class AntipodalSample(ManifoldInferError, ValueError):
    pass


class ZeroVariance(ManifoldInferError, ValueError):
    pass


class EmptyInput(ManifoldInferError, ValueError):
    pass


class EmptyGrid(ManifoldInferError, ValueError):
    pass
