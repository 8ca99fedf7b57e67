from . import user_messages as msg


class VPMEError(Exception):
    """
    Base class for every error raised by the package.
    """


class GridMismatchError(VPMEError, ValueError):
    def __init__(self, first, second) -> None:
        super().__init__(msg.GRID_MISMATCH_MSG.format(first, second))


class InvalidFieldError(VPMEError, ValueError):
    pass


class InvalidParameterError(VPMEError, ValueError):
    def __init__(self, name: str, value, reason: str) -> None:
        super().__init__(msg.INVALID_PARAMETER_MSG.format(name, value, reason))
        self.name = name
        self.value = value


class InvalidNormalizationError(VPMEError, ValueError):
    def __init__(self, mass: float) -> None:
        super().__init__(msg.INVALID_NORMALIZATION_MSG.format(mass))
        self.mass = mass


class InvalidSpecError(VPMEError, ValueError):
    def __init__(self, reason: str) -> None:
        super().__init__(msg.INVALID_SPEC_MSG.format(reason))


class ConfigError(VPMEError, ValueError):
    def __init__(self, line: int, reason: str) -> None:
        super().__init__(msg.CONFIG_ERROR_MSG.format(line, reason))
        self.line = line


class StaleStateError(VPMEError, ValueError):
    def __init__(self) -> None:
        super().__init__(msg.STALE_STATE_MSG)


class CouplingError(VPMEError, ValueError):
    def __init__(self, reason: str) -> None:
        super().__init__(msg.COUPLING_MSG.format(reason))


class UnsynchronizedError(VPMEError, ValueError):
    def __init__(self, first, second) -> None:
        super().__init__(msg.UNSYNCHRONIZED_MSG.format(first, second))


class ConvergenceError(VPMEError, RuntimeError):
    def __init__(self, iterations: int, residual: float) -> None:
        super().__init__(msg.CONVERGENCE_MSG.format(iterations, residual))
        self.iterations = iterations
        self.residual = residual


class GuardViolationError(VPMEError, RuntimeError):
    def __init__(self, mass: float, guard: float, c_g: float) -> None:
        super().__init__(msg.GUARD_VIOLATION_MSG.format(mass, guard, c_g))
        self.mass = mass
        self.guard = guard
        self.c_g = c_g


class TruncationError(VPMEError, RuntimeError):
    def __init__(self, out_of_box_mass: float) -> None:
        super().__init__(msg.TRUNCATION_MSG.format(out_of_box_mass))
        self.out_of_box_mass = out_of_box_mass


class StepError(VPMEError, RuntimeError):
    def __init__(self, time: float, cause: Exception) -> None:
        super().__init__(msg.STEP_ERROR_MSG.format(time, cause))
        self.time = time
        self.cause = cause
