"""Exception hierarchy.

Every error carries a stable ``code`` (used by the CLI error object) and an
optional ``witness`` payload pointing at the offending input.
"""

from __future__ import annotations

from typing import Any


class PCMError(Exception):
    code = "PCMError"

    def __init__(self, message: str, witness: Any = None):
        super().__init__(message)
        self.message = message
        self.witness = witness

    def to_dict(self) -> dict:
        out = {"code": self.code, "message": self.message}
        if self.witness is not None:
            out["witness"] = self.witness
        return out


class InvalidArgument(PCMError):
    code = "InvalidArgument"


# -- expressions --------------------------------------------------------------

class ExprSyntaxError(PCMError):
    code = "SyntaxError"

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})", {"offset": offset})
        self.offset = offset


class UnknownIdentifier(PCMError):
    code = "UnknownIdentifier"

    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown identifier {name!r} (at byte {offset})",
                         {"name": name, "offset": offset})
        self.name = name
        self.offset = offset


class EvalDomain(PCMError):
    code = "EvalDomain"


class EvalOverflow(PCMError):
    code = "Overflow"


# -- maps ---------------------------------------------------------------------

class FormatError(PCMError):
    code = "FormatError"


class BreakpointOrderError(PCMError):
    code = "BreakpointOrderError"


class RangeViolation(PCMError):
    code = "RangeViolation"


class SmoothnessError(PCMError):
    code = "SmoothnessError"


class OutsideDomain(PCMError):
    code = "OutsideDomain"


class ValueAtBreakpoint(PCMError):
    code = "ValueAtBreakpoint"


class OutsidePiece(PCMError):
    code = "OutsidePiece"


class OrderTooHigh(PCMError):
    code = "OrderTooHigh"


class OrderTooLow(PCMError):
    code = "OrderTooLow"


class ShapeMismatch(PCMError):
    code = "ShapeMismatch"


# -- metrics / kernel -----------------------------------------------------------

class DegenerateDomain(PCMError):
    code = "DegenerateDomain"


class NonFiniteObjective(PCMError):
    code = "NonFiniteObjective"


# -- sequences ------------------------------------------------------------------

class TooShort(PCMError):
    code = "TooShort"


class CollapseDetected(PCMError):
    code = "CollapseDetected"


# -- constructions --------------------------------------------------------------

class TargetTooFar(PCMError):
    code = "TargetTooFar"


class OrderCollision(PCMError):
    code = "OrderCollision"


class SamplingFailed(PCMError):
    code = "SamplingFailed"


class NoRoomToMove(PCMError):
    code = "NoRoomToMove"


class VerificationFailed(PCMError):
    code = "VerificationFailed"


# -- critical points / connections -----------------------------------------------

class HypothesisFails(PCMError):
    code = "HypothesisFails"


class DegenerateCritical(PCMError):
    code = "DegenerateCritical"


class HasConnections(PCMError):
    code = "HasConnections"
