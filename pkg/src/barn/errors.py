"""Exception hierarchy. Each error carries the CLI exit code it maps to."""


class BarnError(Exception):
    exit_code = 1


class GridError(BarnError, ValueError):
    pass


class OutOfBounds(GridError, IndexError):
    pass


class InvalidOrigin(GridError):
    pass


class MapFormatError(GridError):
    pass


class ConfigurationError(BarnError, ValueError):
    pass


class NoEndpoint(BarnError):
    exit_code = 3


class InvalidEndpoint(BarnError, ValueError):
    pass


class NoPath(BarnError):
    exit_code = 3


class NoObstacle(BarnError):
    pass


class UndefinedChord(BarnError, ValueError):
    pass


class EmptyPath(BarnError, ValueError):
    pass


class GenerationExhausted(BarnError):
    exit_code = 2


class DivergenceError(BarnError):
    exit_code = 4

    def __init__(self, epoch: int, loss: float):
        super().__init__(f"training diverged at epoch {epoch} (loss={loss})")
        self.epoch = epoch
        self.loss = loss
