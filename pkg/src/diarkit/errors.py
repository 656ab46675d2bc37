"""Exception hierarchy.

``DataError`` subclasses signal malformed or inconsistent input data (the CLI
maps them to exit code 3); ``ConfigError`` subclasses signal bad parameters.
"""


class DiarkitError(Exception):
    pass


class DataError(DiarkitError, ValueError):
    pass


class ConfigError(DiarkitError, ValueError):
    pass


class MalformedLine(DataError):
    def __init__(self, line_no, reason=""):
        self.line_no = line_no
        self.reason = reason
        msg = f"malformed line {line_no}"
        super().__init__(f"{msg}: {reason}" if reason else msg)


class MalformedModel(DataError):
    pass


class DimMismatch(DataError):
    def __init__(self, where, expected=None, got=None):
        self.where = where
        detail = f" (expected {expected}, got {got})" if expected is not None else ""
        super().__init__(f"dimension mismatch at {where}{detail}")


class ZeroVector(DataError):
    def __init__(self, index):
        self.index = index
        super().__init__(f"zero-norm vector at index {index}")


class UnsortedInput(DataError):
    pass


class TooFewClasses(DataError):
    pass


class TooFewSamplesPerClass(DataError):
    pass


class RankDeficient(DataError):
    pass


class EmptyInput(DataError):
    pass


class DegenerateMatrix(DataError):
    pass


class RecordingMismatch(DataError):
    pass


class UnknownRecording(DataError):
    pass


class NoReferenceSpeech(DataError):
    pass


class BadP(ConfigError):
    pass


class BadK(ConfigError):
    pass


class BadConfig(ConfigError):
    def __init__(self, key, reason=""):
        self.key = key
        super().__init__(f"{key}: {reason}" if reason else key)
