"""Exception types shared across the package."""


class JchsimError(Exception):
    """Base class for package-specific errors."""


class SizeError(JchsimError, ValueError):
    """A matrix/vector dimension is inconsistent or exceeds a configured cap."""


class NotHermitianError(JchsimError, ValueError):
    """An operator that must be Hermitian is not (within tolerance)."""


class TruncationError(JchsimError, ValueError):
    """A requested excitation index lies beyond the photon cutoff."""


class ConfigError(JchsimError, ValueError):
    """Invalid run configuration.  Collects every offending field."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class IntegratorError(JchsimError, RuntimeError):
    """Numerical failure during time evolution (norm underflow, bad step)."""
