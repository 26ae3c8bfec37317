"""Error types shared by all modules; the CLI maps each to an exit code."""


class GridcastError(Exception):
    exit_code = 1


class ParameterError(GridcastError, ValueError):
    exit_code = 2


class ContractError(GridcastError, TypeError):
    exit_code = 2


class ResourceError(GridcastError, RuntimeError):
    exit_code = 4
