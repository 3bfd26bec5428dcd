class DroneCellError(Exception):
    """Base class for every domain error raised by the dronecell app."""


class TraceParseError(DroneCellError, ValueError):
    """A solar trace row could not be parsed."""

    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


class TraceDuplicateError(DroneCellError, ValueError):
    """The same (station, day, hour) appears twice in a solar trace."""

    def __init__(self, line, station, day, hour):
        self.line = line
        self.key = (station, day, hour)
        super().__init__(
            f"line {line}: duplicate record for station {station}, day {day}, hour {hour}"
        )


class TraceShapeError(DroneCellError, ValueError):
    """A solar trace does not cover the expected stations/hours."""

    def __init__(self, message, gaps=()):
        self.gaps = list(gaps)
        super().__init__(message)


class DomainError(DroneCellError, ValueError):
    """An argument lies outside the domain of a formula."""


class InfiniteLoadError(DomainError):
    """A user with zero SINR has unbounded load."""


class SingularityError(DroneCellError, ArithmeticError):
    """A path-loss term was evaluated at zero distance."""


class ShapeError(DroneCellError, ValueError):
    """Input dimensions do not match the model."""


class DivergenceError(DroneCellError, ArithmeticError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch, loss):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"training diverged at epoch {epoch} (loss={loss})")


class CheckpointError(DroneCellError, ValueError):
    """A model checkpoint is corrupt or does not match the expected layout."""


class InvariantViolation(DroneCellError, RuntimeError):
    """The simulated world reached an inconsistent state."""

    def __init__(self, message, station=None, drone=None):
        self.station = station
        self.drone = drone
        where = []
        if station is not None:
            where.append(f"station {station}")
        if drone is not None:
            where.append(f"drone {drone}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class EvolutionAborted(DroneCellError, RuntimeError):
    """Every individual of a generation diverged."""

    def __init__(self, generation, diagnostics):
        self.generation = generation
        self.diagnostics = list(diagnostics)
        super().__init__(
            f"generation {generation}: all individuals diverged "
            f"({'; '.join(self.diagnostics[:5])})"
        )
