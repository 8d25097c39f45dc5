"""Exception hierarchy shared by all hykge modules."""


class HykgeError(Exception):
    """Base class for every error raised by hykge."""


class InputError(HykgeError, ValueError):
    """Bad user input: malformed files, illegal configuration, bad ids."""


class ConsistencyError(HykgeError):
    """Stored artifacts disagree with each other (checkpoint vs. dataset)."""


class LengthMismatch(InputError):
    pass


class NotDivisibleBy4(InputError):
    pass


class NotDivisibleBy2(InputError):
    pass


class ZeroNormBlock(InputError):
    pass


class ZeroNormPair(InputError):
    pass


class PointOutsideBall(InputError):
    pass


class BadDimension(InputError):
    pass


class UnknownId(InputError):
    pass


class IllegalVariant(InputError):
    pass


class ShapeMismatch(InputError):
    pass


class MalformedLine(InputError):
    def __init__(self, path, line_number, reason="expected 3 tab-separated fields"):
        self.path = str(path)
        self.line_number = line_number
        super().__init__(f"{path}:{line_number}: {reason}")


class DatasetIOError(InputError, OSError):
    pass


class EmptySplit(InputError):
    pass


class EmptyGraph(InputError):
    pass


class ZeroVariance(InputError):
    pass


class CorruptCheckpoint(ConsistencyError):
    pass


class VocabMismatch(ConsistencyError):
    pass
