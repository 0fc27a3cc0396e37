"""Exception hierarchy shared by all modules."""


class SpecwalkError(Exception):
    """Base class for all errors raised by specwalk."""


class CapExceededError(SpecwalkError):
    """A dense materialization or statevector would exceed the configured cap."""


class SymmetryError(SpecwalkError):
    """An oracle is malformed or not symmetric."""


class GateSetError(SpecwalkError):
    """A circuit uses a gate outside the allowed set."""


class BudgetError(SpecwalkError):
    """The requested accuracy cannot be met with the given parameters."""


class AutomorphismError(SpecwalkError):
    """A supplied permutation is not an automorphism exchanging the required vertices."""


class FormatError(SpecwalkError):
    """An instance file does not follow the documented text format."""
