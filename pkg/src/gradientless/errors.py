class ParameterError(ValueError):
    """Invalid argument or configuration."""


class DomainError(ValueError):
    """A value fell outside the domain of a transform."""
