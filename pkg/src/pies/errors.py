class ConfigError(ValueError):
    """A configuration value violates a model invariant.

    ``path`` is the dotted location of the offending field, e.g.
    ``storages[0].soc_min``.
    """

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class ConfigParseError(ConfigError):
    """The configuration text is not well-formed."""


class BuildError(ValueError):
    """The scheduling problem is infeasible by construction."""


class AuditError(RuntimeError):
    """Recomputed costs disagree with the solver objective."""


def check(cond: bool, path: str, message: str) -> None:
    if not cond:
        raise ConfigError(path, message)
