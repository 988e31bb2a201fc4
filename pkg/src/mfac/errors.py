"""Exception hierarchy shared by every module of the package."""


class MfacError(Exception):
    """Base class for all errors raised by :mod:`mfac`."""


class DimensionMismatch(MfacError, ValueError):
    pass


class NonContiguousIndex(MfacError, ValueError):
    pass


class InvalidOrders(MfacError, ValueError):
    pass


class UnsupportedOrders(MfacError, ValueError):
    pass


class LengthMismatch(MfacError, ValueError):
    pass


class MissingSamples(MfacError, LookupError):
    pass


class UnknownPlant(MfacError, KeyError):
    pass


class UnknownTrajectory(MfacError, KeyError):
    pass


class UnknownDisturbance(MfacError, KeyError):
    pass


class SingularGain(MfacError, ArithmeticError):
    pass


class SingularNormalMatrix(MfacError, ArithmeticError):
    pass


class GainOutOfRange(MfacError, ValueError):
    pass


class ZeroPolynomial(MfacError, ValueError):
    pass


class SingularAtPoint(MfacError, ArithmeticError):
    pass


class UnstableLoop(MfacError, ArithmeticError):
    pass


class ConfigParse(MfacError, ValueError):
    pass


class ConfigInvalid(MfacError, ValueError):
    pass


class IoFailure(MfacError, OSError):
    pass
