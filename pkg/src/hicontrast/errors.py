"""Exception hierarchy.

Configuration problems map to CLI exit code 2, everything deriving from
:class:`NumericalError` to exit code 3.
"""


class HicontrastError(Exception):
    """Base class for all package errors."""


class ConfigError(HicontrastError):
    """Invalid or incomplete run configuration.

    ``path`` is the dotted section/field location, e.g.
    ``geometry.inclusion.radius``.
    """

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class GeometryError(ConfigError):
    """Geometric invariant violated (inclusion not interior, bad radius...)."""


class NumericalError(HicontrastError):
    """Failure inside a numerical routine."""


class AssemblyError(NumericalError):
    """Degenerate element met during finite element assembly."""

    def __init__(self, element, volume):
        self.element = element
        self.volume = volume
        super().__init__(f"degenerate element {element} (volume {volume:.3e})")


class PeriodicMatchError(NumericalError):
    """Boundary vertices of a periodic cell mesh without a partner."""

    def __init__(self, coords):
        self.coords = coords
        preview = ", ".join(str(tuple(round(float(c), 12) for c in p)) for p in coords[:5])
        super().__init__(f"{len(coords)} unmatched periodic vertices: {preview}")


class FactorizationError(NumericalError):
    """Shifted matrix could not be factorized; perturb the shift."""


class ConvergenceError(NumericalError):
    """Iterative method did not reach the requested accuracy."""

    def __init__(self, message, residual=None, trace=None):
        self.residual = residual
        self.trace = trace
        super().__init__(message)


class PoleProximityError(NumericalError):
    """Spectral parameter too close to an inclusion eigenvalue."""

    def __init__(self, lam, pole):
        self.lam = lam
        self.pole = pole
        super().__init__(f"lambda={lam!r} lies within the pole guard of lambda_j={pole!r}")


class OutOfGapError(NumericalError):
    """Spectral parameter where beta(lambda) >= 0 (not in a gap)."""

    def __init__(self, lam, beta):
        self.lam = lam
        self.beta = beta
        super().__init__(f"lambda={lam!r} is not in a gap (beta={beta!r} >= 0)")
