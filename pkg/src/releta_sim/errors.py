"""Exception types shared across the simulator and experiment tooling."""


class SimError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(SimError):
    """A config value or argument violates a documented invariant.

    ``field`` names the offending parameter so callers (and the CLI) can
    point at it directly.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class ConfigParseError(SimError):
    """A config file failed to parse. Carries the 1-based line number."""

    def __init__(self, path: str, line: int, message: str):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


class StabilityError(SimError):
    """The explicit thermal update was called with an unstable time step."""


class DivergenceError(SimError):
    """Training produced non-finite gradients or parameters."""


class ArrivalsExhausted(SimError):
    """The arrival process was asked for more releases than configured."""


class EpisodeError(SimError):
    """An episode failed mid-run. Carries the release index that failed."""

    def __init__(self, release_index: int, message: str):
        self.release_index = release_index
        super().__init__(f"release {release_index}: {message}")
