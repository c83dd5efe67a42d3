"""Exception and warning types shared across the package."""


class ParameterError(ValueError):
    """Invalid physical parameter, malformed state, or bad configuration."""


class ConfigError(ParameterError):
    """Configuration document failed to parse or validate; the message
    carries the dotted field path."""


class NumericalFailure(RuntimeError):
    """A numerical routine could not produce a trustworthy result."""

    def __init__(self, message, record=None):
        super().__init__(message)
        # optional diagnostic payload, e.g. the scan grid that failed to bracket
        self.record = record


class StiffnessError(NumericalFailure):
    """Step size underflow in the full integrator; the slow subsystem should
    be integrated with the slaved integrator instead."""


class FitError(RuntimeError):
    """Degenerate or ill-posed fit input."""


class NoTransitError(RuntimeError):
    """Switching-time extraction on a trajectory that never left its branch."""


class RateOrderingWarning(UserWarning):
    """Relaxation rates violate the slow-spin ordering gamma_par < gamma_perp < kappa."""
