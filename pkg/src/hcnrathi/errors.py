"""Exception types shared by the library and the command line front end."""


class DomainError(ValueError):
    """An argument lies outside the domain where the model is defined."""


class ConfigError(ValueError):
    """A configuration value violates one of its invariants."""


class SingularChannelError(ArithmeticError):
    """The Gram matrix of a channel estimate is numerically singular."""
