"""Exception types shared across the package."""


class InfeasibleError(Exception):
    """A requested split/configuration violates a hard feasibility constraint."""


class ConfigError(Exception):
    """An experiment configuration file is malformed or inconsistent."""
