"""Exception hierarchy shared by every stage of the toolchain."""

from __future__ import annotations


class OptoFsmError(Exception):
    """Base class for all errors raised by optofsm."""


class MalformedSpec(OptoFsmError, ValueError):
    """A truth table or expression cannot be turned into a BDD."""


class EmptyOrder(MalformedSpec):
    """A non-constant function was given no variables to decide on."""


class MissingAssignment(OptoFsmError, KeyError):
    def __init__(self, variable: str):
        super().__init__(variable)
        self.variable = variable

    def __str__(self) -> str:
        return f"no value assigned to variable {self.variable!r}"


class DomainError(OptoFsmError, ValueError):
    """A physical parameter lies outside its meaningful range."""


class ConstantFunction(OptoFsmError):
    """Constant functions need no optics; wire them directly."""

    def __init__(self, value: int):
        super().__init__(f"function is constant {value}; no optical network needed")
        self.value = value


class MarginExhausted(OptoFsmError):
    """The compiled network cannot separate logic levels under the configured losses."""


class PortNotFound(OptoFsmError, KeyError):
    pass


class ResonatorNotFound(OptoFsmError, KeyError):
    pass


class ParseError(OptoFsmError, ValueError):
    def __init__(self, message: str, line: int | None = None, token: str | None = None):
        self.line = line
        self.token = token
        where = ""
        if line is not None:
            where = f"line {line}: "
        if token is not None:
            message = f"{message} (at {token!r})"
        super().__init__(where + message)


class ValidationError(OptoFsmError, ValueError):
    """A netlist or machine violates a structural invariant."""


class CombinationalCycle(ValidationError):
    """Light or pump signals form a loop within one clock phase."""


class IndeterminateLogic(OptoFsmError):
    def __init__(self, photodiode: str, power_dbm: float, pins: tuple[str, ...] = (),
                 cycle: int | None = None):
        self.photodiode = photodiode
        self.power_dbm = power_dbm
        self.pins = pins
        self.cycle = cycle
        msg = f"photodiode {photodiode} reads {power_dbm:.3f} dBm inside the guard band"
        if pins:
            msg += f" (drives {', '.join(pins)})"
        if cycle is not None:
            msg = f"cycle {cycle}: {msg}"
        super().__init__(msg)

    def at_cycle(self, cycle: int) -> "IndeterminateLogic":
        return IndeterminateLogic(self.photodiode, self.power_dbm, self.pins, cycle)


class NonTotalTable(OptoFsmError, ValueError):
    """A transition table is missing entries or references undeclared states."""


class UnreachableStateWarning(UserWarning):
    pass
