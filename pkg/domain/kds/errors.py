class KdsError(Exception):
    exit_code = 1


class InvalidInputError(KdsError, ValueError):
    exit_code = 2


class DimensionError(InvalidInputError):
    pass


class NumericalError(KdsError, ArithmeticError):
    exit_code = 1


class InfeasibleError(NumericalError):
    pass


class StorageError(KdsError, OSError):
    exit_code = 2
