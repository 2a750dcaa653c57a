"""Diagnostics: stable machine-readable error codes shared by the pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .syntax import Span

# Stable code registry (part of the CLI contract; never renumber/rename).
E_PARSE = "E-PARSE"
E_NON_MNF = "E-NON-MNF"
E_IO = "E-IO"
E_UNBOUND = "E-UNBOUND"
E_ILL_FORMED = "E-ILL-FORMED"
E_NOT_FUNCTION = "E-NOT-FUNCTION"
E_ARG_MISMATCH = "E-ARG-MISMATCH"
E_BOUND_VIOLATION = "E-BOUND-VIOLATION"
E_AVOIDANCE = "E-AVOIDANCE"
E_EXIST_ESCAPE = "E-EXIST-ESCAPE"
E_NEEDS_LETEX = "E-NEEDS-LETEX"
E_SCOPE_LEAK = "E-SCOPE-LEAK"
E_TYPE_MISMATCH = "E-TYPE-MISMATCH"
E_CAPT_ESCAPE = "E-CAPT-ESCAPE"
E_REACH_ESCAPE = "E-REACH-ESCAPE"
E_CAP_IN_TYPE_ARG = "E-CAP-IN-TYPE-ARG"
E_UNBOX_USE = "E-UNBOX-USE"
E_CAP_UNBOX = "E-CAP-UNBOX"
E_CAP_IN_COV_ARG = "E-CAP-IN-COV-ARG"
E_UNKNOWN_TYPEDEF = "E-UNKNOWN-TYPEDEF"
E_ARITY = "E-ARITY"
E_VARIANCE = "E-VARIANCE"
E_CAP_COVARIANT = "E-CAP-COVARIANT"
E_UNMAPPED_CAPTURE = "E-UNMAPPED-CAPTURE"
E_NOT_PROPER = "E-NOT-PROPER"
E_TRANSLATE_MISMATCH = "E-TRANSLATE-MISMATCH"
E_TRANSLATE_UNSUPPORTED = "E-TRANSLATE-UNSUPPORTED"
E_ILL_TYPED_STORE = "E-ILL-TYPED-STORE"
E_STUCK = "E-STUCK"
E_FUEL = "E-FUEL"
E_INTERNAL = "E-INTERNAL"


@dataclass
class Diagnostic:
    severity: str  # "error" | "warning" | "note"
    code: str
    message: str
    span: Optional[Span] = None
    file: Optional[str] = None
    rule: Optional[str] = None
    expected: Optional[str] = None
    actual: Optional[str] = None

    def to_json(self) -> dict:
        out: dict = {"severity": self.severity, "code": self.code, "message": self.message}
        if self.file is not None:
            out["file"] = self.file
        if self.span is not None:
            out["line"] = self.span.line
            out["col"] = self.span.col
            out["endLine"] = self.span.end_line
            out["endCol"] = self.span.end_col
        if self.rule is not None:
            out["rule"] = self.rule
        if self.expected is not None:
            out["expected"] = self.expected
        if self.actual is not None:
            out["actual"] = self.actual
        return out

    def render(self, color: bool = False) -> str:
        loc = ""
        if self.span is not None:
            loc = f"{self.span.line}:{self.span.col}: "
        if self.file is not None:
            loc = f"{self.file}:{loc}"
        sev = self.severity
        if color:
            tint = {"error": "31", "warning": "33", "note": "36"}.get(sev, "0")
            sev = f"\x1b[{tint}m{sev}\x1b[0m"
        parts = [f"{loc}{sev}[{self.code}]: {self.message}"]
        if self.expected is not None:
            parts.append(f"  expected: {self.expected}")
        if self.actual is not None:
            parts.append(f"  actual:   {self.actual}")
        if self.rule is not None:
            parts.append(f"  rule: {self.rule}")
        return "\n".join(parts)


class CheckError(Exception):
    """Raised by the checkers/translator with a structured diagnostic."""

    def __init__(self, diag: Diagnostic):
        super().__init__(diag.message)
        self.diag = diag


def err(
    code: str,
    message: str,
    span: Optional[Span] = None,
    rule: Optional[str] = None,
    expected: Optional[str] = None,
    actual: Optional[str] = None,
) -> CheckError:
    return CheckError(
        Diagnostic("error", code, message, span=span, rule=rule, expected=expected, actual=actual)
    )


@dataclass
class InternalError(Exception):
    """Invariant violation inside the toolchain (a bug, not a user error)."""

    message: str
    hint: str = field(default="")
