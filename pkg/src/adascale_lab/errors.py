"""Exception types shared across the package."""


class ConfigError(Exception):
    """Invalid configuration or violated call precondition."""


class CapabilityError(Exception):
    """The requested operation is not supported by this objective/estimator."""


class DomainError(ValueError):
    """A theoretical bound was evaluated outside its hypothesis domain."""
