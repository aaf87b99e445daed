"""Exception hierarchy shared across the package."""


class DPEstError(Exception):
    """Base class for all package errors."""

    category = "error"


class DomainError(DPEstError, ValueError):
    """An argument lies outside the domain of a function."""

    category = "domain"


class DegenerateRegionError(DPEstError, ValueError):
    """The privacy shell has (numerically) zero area."""

    category = "degenerate-region"


class NotPositiveDefiniteError(DPEstError, ValueError):
    """A covariance matrix is not positive definite."""

    category = "not-positive-definite"


class ShapeError(DPEstError, ValueError):
    """Inputs have inconsistent lengths or count structures."""

    category = "shape"


class ChainStateError(DPEstError, RuntimeError):
    """The MCMC chain reached a state with zero posterior weight."""

    category = "numerical"


class InsufficientDataError(DPEstError, ValueError):
    """Too few samples to fit a distribution."""

    category = "insufficient-data"


class ConfigError(DPEstError, ValueError):
    """A configuration or input file failed validation."""

    category = "validation"
