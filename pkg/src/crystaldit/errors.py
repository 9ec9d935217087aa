"""Exception types.

Every error carries a ``category`` used by the command-line driver to pick
an exit code: ``usage`` (2), ``data`` (3) or ``numeric`` (4).
"""


class CrystalDiTError(Exception):
    category = "data"


class UsageError(CrystalDiTError):
    category = "usage"


class DataError(CrystalDiTError):
    category = "data"


class NumericError(CrystalDiTError, ArithmeticError):
    category = "numeric"


class OutOfRange(DataError, ValueError):
    pass


class UnknownElement(DataError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class NonFinite(NumericError, ValueError):
    pass


class DegenerateLattice(NumericError, ValueError):
    pass


class TooManyAtoms(DataError, ValueError):
    pass


class UnencodableSpecies(DataError, ValueError):
    pass


class ShapeMismatch(DataError, ValueError):
    pass


class ParseError(DataError, ValueError):
    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class DatasetError(DataError, OSError):
    pass


class EmptyDataset(DataError, ValueError):
    pass


class EmptyInput(DataError, ValueError):
    pass


class ConfigMismatch(DataError, ValueError):
    pass


class InvalidRange(UsageError, ValueError):
    pass


class InvalidAlpha(UsageError, ValueError):
    pass


class InvalidWindow(UsageError, ValueError):
    pass


class EmptyHistory(DataError, ValueError):
    pass
