"""Exception types shared across gaflab modules."""


class GaflabError(Exception):
    """Base class for gaflab-specific failures."""


class ZeroNearContourError(GaflabError):
    """Winding quadrature failed to converge; a zero sits too close to the contour."""

    def __init__(self, radius: float, nodes: int):
        self.radius = radius
        self.nodes = nodes
        super().__init__(
            f"winding integral did not settle on an integer at radius {radius!r} "
            f"after {nodes} nodes; a zero is likely near the contour"
        )


class CountMismatchError(GaflabError):
    """Companion-matrix root count and winding count disagree after retries."""

    def __init__(self, companion_count: int, winding_count: int, radius: float):
        self.companion_count = companion_count
        self.winding_count = winding_count
        self.radius = radius
        super().__init__(
            f"zero-count mismatch inside radius {radius!r}: companion roots give "
            f"{companion_count}, winding integral gives {winding_count}"
        )


class DegenerateInputError(GaflabError):
    """Input lies on a measure-zero degeneracy the operation cannot handle."""


class StarvationError(GaflabError):
    """A Monte Carlo campaign produced too few successes to be usable."""
