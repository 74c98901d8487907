"""Exception hierarchy shared by every ina module."""


class INAError(Exception):
    """Base class for all errors raised by ina."""


class DomainError(INAError, ValueError):
    """An argument lies outside the mathematical domain of a formula."""


class ValidationError(INAError, ValueError):
    """Input data is malformed or inconsistent."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ModelFileError(INAError):
    """A model file could not be decoded."""

    code = "model_format"


class VersionMismatchError(ModelFileError):
    code = "version_mismatch"


class ChecksumError(ModelFileError):
    code = "checksum"


class TruncatedModelError(ModelFileError):
    code = "truncated"
