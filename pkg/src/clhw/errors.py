"""Exception types shared across the library."""


class ClhwError(Exception):
    """Base class for all library errors."""


class NotHermitian(ClhwError):
    pass


class NotPSD(ClhwError):
    pass


class NotProjector(ClhwError):
    pass


class NotRank1(ClhwError):
    pass


class NonCommuting(ClhwError):
    pass


class DimensionMismatch(ClhwError):
    pass


class UnknownRegister(ClhwError):
    pass


class RegisterNotInSupport(ClhwError):
    pass


class OverlapNotSingleton(ClhwError):
    pass


class NumericalFailure(ClhwError):
    pass


class ParseError(ClhwError):
    """Malformed serialized input; carries a location string."""

    def __init__(self, message, location="$"):
        super().__init__(f"{location}: {message}")
        self.location = location


class InsufficientDimension(ClhwError):
    pass


class HypothesisViolated(ClhwError):
    pass


class DegenerateBprime(ClhwError):
    pass


class OverlapViolation(ClhwError):
    pass


class BlockOutOfRange(ClhwError):
    pass


class NotClassical(ClhwError):
    pass


class InvalidWitness(ClhwError):
    pass


class BranchOutOfRange(ClhwError):
    pass


class PreconditionViolated(ClhwError):
    pass


class VacuousBlock(ClhwError):
    """The chosen block has no overlap with the relevant state; the prover
    must pick a different block."""


class NoCyclicOrder(ClhwError):
    pass


class MoreThanTwoActors(ClhwError):
    pass


class GridTooSmall(ClhwError):
    pass


class RoutingFailed(ClhwError):
    pass


class NotTwoLocal(ClhwError):
    pass


class BudgetExhausted(ClhwError):
    pass


class GatesDoNotCommute(ClhwError):
    pass


class NotProjectors(ClhwError):
    pass


class TooLarge(ClhwError):
    pass
