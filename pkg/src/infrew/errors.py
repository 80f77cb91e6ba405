"""Exception hierarchy shared by every module of the package."""


class InfrewError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(InfrewError):
    """A rule was applied to premisses outside its domain."""


class NonProductive(InfrewError):
    """A lazy or cyclic structure failed to produce a node within its budget."""


class NotRegular(InfrewError):
    """A state-graph exploration exceeded its budget."""


class Mismatch(InfrewError):
    """A pattern or left-hand side does not match a tree."""


class UnguardedCycle(InfrewError):
    """A rec-cycle does not cross any coinductive premiss."""


class UnboundBackEdge(InfrewError):
    """A back edge refers to a label with no enclosing binder."""


class TreeSyntaxError(InfrewError):
    """Text input could not be parsed."""

    def __init__(self, message, line=None, column=None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column


class BadPath(InfrewError):
    """A step path does not exist in the tree it is applied to."""


class StepNotApplicable(InfrewError):
    """A zero step does not apply at the addressed subtree."""


class OrdinalNotLarger(InfrewError):
    """Weakening was asked to lower an ordinal annotation."""


class EndpointMismatch(InfrewError):
    """Two witnesses do not meet at a common tree."""


class OrdinalViolation(InfrewError):
    """A segment ordinal is not strictly below its enclosing split."""


class ShapeMismatch(InfrewError):
    """A witness does not have the shape required by a pattern lemma."""


class WellFoundednessExhausted(InfrewError):
    """The ordinal recursion of the preponement engine ran too deep."""


class NotLinear(InfrewError):
    """A left-hand side repeats a variable."""


class MissingVariableWitness(InfrewError):
    """Pattern filling lacks a witness for some variable."""


class NotARedex(InfrewError):
    """The root of a lambda term is not a beta redex."""


class UnresolvedIndex(InfrewError):
    """A de Bruijn index points past every enclosing binder."""


class NotApplicable(InfrewError):
    """A cut-elimination root step does not apply."""


class InternalInvariant(InfrewError):
    """A multicut produced by a root step violates its side conditions."""


class NotPartitionable(InfrewError):
    """Context premisses of a tensor commutation cannot be split."""
