from .constants import EXIT_CONFIG, EXIT_NUMERICAL


class LabError(Exception):
    exit_code = EXIT_NUMERICAL


class ShapeError(LabError, ValueError):
    pass


class NumericalError(LabError, ArithmeticError):
    pass


class FormatError(LabError, ValueError):
    pass


class ConfigError(LabError, ValueError):
    exit_code = EXIT_CONFIG


class RunExistsError(LabError, FileExistsError):
    exit_code = EXIT_CONFIG


class GraphError(LabError, ValueError):
    pass
