"""Exception hierarchy.

``Refusal`` marks inputs that were understood and deliberately rejected
because a hypothesis of the underlying existence result fails (CLI exit
code 2).  Everything else derives from ``EqbunError`` directly (exit 1).
"""


class EqbunError(Exception):
    """Base class for all errors raised by eqbun."""


class Refusal(EqbunError):
    """A validated refusal: the request violates a rank or dimension bound."""


# complexes
class ComplexError(EqbunError):
    pass


class NonInvolutive(ComplexError):
    pass


class NotSimplicial(ComplexError):
    pass


class MixedOrbitSimplex(ComplexError):
    pass


class SubcomplexInvalid(ComplexError):
    pass


class NotASubcomplex(ComplexError):
    pass


class UnsupportedDimension(EqbunError):
    pass


# linear algebra / bundles
class DimensionMismatch(EqbunError):
    pass


class OddAmbientQuaternionic(EqbunError):
    pass


class OddRankQuaternionic(Refusal):
    pass


class OddRankOnFixedLocus(Refusal):
    pass


class BaseMismatch(EqbunError):
    pass


class SymmetryMismatch(EqbunError):
    pass


class NotAProjectionField(EqbunError):
    pass


class NotEquivariant(EqbunError):
    pass


class GapLost(EqbunError):
    pass


class GaplessHamiltonian(Refusal):
    pass


class MarginTooSmall(EqbunError):
    pass


# extension
class DimensionBoundViolated(Refusal):
    pass


class RankBelowThreshold(Refusal):
    pass


class NoMissedDirectionFound(EqbunError):
    pass


# stable isomorphism / conjugacy
class RankMismatch(EqbunError):
    pass


class BoundaryIncompatible(EqbunError):
    pass


class Mismatch(EqbunError):
    pass


class SingularInput(EqbunError):
    pass


# io
class ParseError(EqbunError):
    pass


class SymmetryViolation(EqbunError):
    pass


class UnknownScenario(EqbunError):
    pass


class NotAnIsomorphism(EqbunError):
    pass
