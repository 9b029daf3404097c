"""Exception types raised across the tracking pipeline."""


class TubetrackError(Exception):
    """Base class for all errors raised by this package."""


class InputError(TubetrackError):
    """Bad user-supplied data (non-finite pixels, out-of-image seeds, ...)."""


class IngestionError(InputError):
    """An image file could not be read or decoded."""


class DimensionError(TubetrackError):
    """Array shapes are incompatible with the requested operation."""


class ConfigurationError(TubetrackError):
    """A parameter violates its documented range or type."""


class GenerationError(TubetrackError):
    """A synthetic scene could not be rendered inside its canvas."""


class UnreachableTargetError(TubetrackError):
    """Front propagation exhausted the grid without reaching the stop set.

    Carries the largest accepted distance so callers can report how far the
    front travelled before giving up.
    """

    def __init__(self, farthest_distance):
        self.farthest_distance = float(farthest_distance)
        super().__init__(
            f"stop set unreachable (farthest accepted distance "
            f"{self.farthest_distance:.6g})"
        )


class BacktrackError(TubetrackError):
    """Gradient descent on the distance map stagnated before the source.

    The partial path collected so far is attached for diagnostics.
    """

    def __init__(self, message, partial_path=None):
        self.partial_path = partial_path
        super().__init__(message)


class NoRouteError(TubetrackError):
    """Dijkstra could not connect the requested nodes."""

    def __init__(self, src, dst, component_size, nearest=None):
        self.src = src
        self.dst = dst
        self.component_size = int(component_size)
        self.nearest = nearest or []
        super().__init__(
            f"no route from node {src} to node {dst} "
            f"(source component has {component_size} nodes)"
        )
