"""Exception hierarchy shared by all modules."""


class SSpectrumError(Exception):
    """Base class for every error raised by :mod:`sspectrum`."""


class DomainError(SSpectrumError, ValueError):
    """An argument lies outside the domain of the operation (e.g. inverse of 0)."""


class SpectralPointError(SSpectrumError):
    """The requested point lies on (or numerically too close to) the S-spectrum."""

    def __init__(self, msg, q=None, sigma_min=None):
        super().__init__(msg)
        self.q = q
        self.sigma_min = sigma_min


class DivergenceError(SSpectrumError):
    """A Cauchy kernel series was requested outside ``||A|| < |q|``."""


class NumericError(SSpectrumError):
    """An eigen/singular value engine failed or produced inconsistent output."""


class PreconditionError(SSpectrumError):
    """The hypothesis of a theorem harness is violated by the given instance."""


class UnsupportedOperationError(SSpectrumError, NotImplementedError):
    """The algebra instance does not provide the requested decision procedure."""


class NotFredholmError(SSpectrumError):
    """The operator is not Fredholm, so no index exists."""


class InstabilityError(SSpectrumError):
    """Windowed kernel/cokernel dimensions did not stabilise under window growth."""


class WindowTooSmallError(SSpectrumError, ValueError):
    """A truncation window cannot faithfully hold the operator's finite-rank part."""
