"""Exception hierarchy shared by all pairforge modules."""


class PairforgeError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(PairforgeError):
    """Bad input or configuration; the CLI maps these to exit status 1."""


class LineCountMismatch(ValidationError):
    pass


class EmptySource(ValidationError):
    pass


class EmptyCorpus(ValidationError):
    pass


class EmptyInput(ValidationError):
    pass


class EmptyPool(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class NegativeFactor(ValidationError):
    pass


class AlignmentError(ValidationError):
    """Provider output cannot be matched to the requested sources."""


class ConfigError(ValidationError):
    def __init__(self, field, message=None):
        self.field = field
        super().__init__(f"config field {field!r}: {message}" if message else f"config field {field!r}")


class MissingArtifact(ValidationError):
    def __init__(self, path, hint=None):
        self.path = str(path)
        msg = f"missing artifact: {self.path}"
        if hint:
            msg += f" ({hint})"
        super().__init__(msg)


class ServiceUnreachable(PairforgeError):
    pass


class ServiceTimeout(ServiceUnreachable):
    pass
