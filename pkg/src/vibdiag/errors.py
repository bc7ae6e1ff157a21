"""Exception hierarchy shared by every vibdiag module."""


class VibDiagError(Exception):
    """Base class for all package errors."""


class InvalidParameter(VibDiagError, ValueError):
    pass


# signal io
class MissingFile(VibDiagError, FileNotFoundError):
    pass


class MalformedRecord(VibDiagError, ValueError):
    pass


class EmptySignal(VibDiagError, ValueError):
    pass


class SignalTooShort(VibDiagError, ValueError):
    pass


class TooFewSamples(VibDiagError, ValueError):
    pass


# features
class EmptyInput(VibDiagError, ValueError):
    pass


class DegenerateRegression(VibDiagError, ArithmeticError):
    pass


class InvalidK(VibDiagError, ValueError):
    pass


class ZeroVariance(VibDiagError, ArithmeticError):
    pass


class InvalidLength(VibDiagError, ValueError):
    pass


class FrameTooLong(VibDiagError, ValueError):
    pass


class NegativeFrequency(VibDiagError, ValueError):
    pass


class TooManyFilters(VibDiagError, ValueError):
    pass


class TooManyCoefficients(VibDiagError, ValueError):
    pass


# classifiers
class DimensionMismatch(VibDiagError, ValueError):
    pass


class SingleClassData(VibDiagError, ValueError):
    pass


class MissingClass(VibDiagError, ValueError):
    pass


class UnknownClass(VibDiagError, KeyError):
    pass


class TooFewPoints(VibDiagError, ValueError):
    pass


class DegenerateData(VibDiagError, ValueError):
    pass


class EmptyObservation(VibDiagError, ValueError):
    pass


class EmptySequence(VibDiagError, ValueError):
    pass


class TooFewObservations(VibDiagError, ValueError):
    pass


class InvalidLearningRate(VibDiagError, ValueError):
    pass


# pipeline / persistence
class ClassTooSmall(VibDiagError, ValueError):
    pass


class FeatureSpecMismatch(VibDiagError, ValueError):
    pass


class IoFailure(VibDiagError, OSError):
    pass


class VersionMismatch(VibDiagError, ValueError):
    pass


class CorruptBundle(VibDiagError, ValueError):
    pass
