"""Exception hierarchy.

``InputError`` subclasses map to CLI exit code 2, ``NumericalError``
subclasses to exit code 1.
"""


class SitnikovError(Exception):
    pass


class InputError(SitnikovError, ValueError):
    pass


class NumericalError(SitnikovError, ArithmeticError):
    pass


# primaries
class EccentricityOutOfRange(InputError):
    pass


class NotCertified(InputError):
    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class OriginCrossing(InputError):
    pass


class NotPeriodic(InputError):
    pass


class InvalidTable(InputError):
    pass


class CollisionDetected(NumericalError):
    pass


class ToleranceNotMet(NumericalError):
    pass


# field
class LambdaOutOfRange(InputError):
    pass


class BoundsMismatch(NumericalError):
    pass


# conservative
class EnergyOutOfRange(InputError):
    pass


class NoSeed(NumericalError):
    pass


class AntiperiodicityUnattainable(NumericalError):
    pass


class BracketFailure(NumericalError):
    pass


# shooting
class IntegratorFailure(NumericalError):
    pass


class NonFiniteState(NumericalError):
    pass


class ResidualTooLarge(NumericalError):
    pass


class DegenerateProfile(NumericalError):
    pass


class CountMismatch(NumericalError):
    pass


# continuation
class SeedInvalid(NumericalError):
    pass


class StepFailure(NumericalError):
    pass


class ZeroCountBreach(NumericalError):
    pass


# spectral
class IndexNotBracketed(NumericalError):
    pass


class WeightNotPositive(NumericalError):
    pass


class BoundViolated(NumericalError):
    pass
