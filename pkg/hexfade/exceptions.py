from typer import BadParameter


class PresetNotFoundError(BadParameter):
    def __init__(self, preset: str) -> None:
        super().__init__(f"Preset '{preset}' not found.")


class HexfadeError(Exception):
    """General error raised by hexfade operations."""


class DomainError(HexfadeError, ValueError):
    """An argument lies outside the domain of the operation."""


class DegenerateModelError(HexfadeError):
    """The operation needs a strictly positive shadowing deviation."""

    def __init__(self, operation: str) -> None:
        super().__init__(f"{operation} is undefined for sigma_psi_db = 0; use the unshadowed path-loss law instead.")


class EmptySampleError(HexfadeError):
    """A statistic was requested over an empty sample set."""
