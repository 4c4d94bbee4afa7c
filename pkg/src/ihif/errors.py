"""Exception hierarchy shared by the pipeline stages and the CLI."""


class IhifError(Exception):
    """Base class for all errors raised by this package."""


class DataError(IhifError, ValueError):
    """Bad input data: unreadable files, wrong geometry, infeasible splits."""


class ModelFormatError(DataError):
    """A model file could not be decoded."""


class ChecksumError(ModelFormatError):
    pass


class VersionError(ModelFormatError):
    pass


class NumericalError(IhifError, ArithmeticError):
    """Numerical failure, e.g. ICA not converging when strict mode is on."""


class StageError(IhifError):
    """Wraps an error raised inside one pipeline stage.

    ``stage`` names the stage (``load``, ``features``, ``ica`` ...) and
    ``item`` the offending file path or subject, when there is one.
    """

    def __init__(self, stage, message, item=None, cause=None):
        self.stage = stage
        self.item = item
        self.cause = cause
        where = f" [{item}]" if item is not None else ""
        super().__init__(f"{stage}{where}: {message}")
