"""Algorithmic subcapturing for both calculi and Capless bound subtyping.

The algorithm decides C1 <= C2 element-wise: an atom is below C2 if it is a
member, or (term variables) its declared capture set is below C2, or
(Capless capture variables) its declared bound is below C2.  Transitivity
is admissible; the enumeration oracle in the conformance suite checks this
against a declarative derivation search.
"""

from __future__ import annotations

from .diagnostics import InternalError
from .syntax import (
    CapCap,
    CaplessType,
    Capture,
    CaptureBound,
    CaptureSet,
    CaptVarCap,
    Label,
    ReachCap,
    ReacapType,
    TermCap,
)
from .wellformed import CaptBind, Context, TermBind


def _sub_atoms(
    ctx: Context, c1: CaptureSet, c2: CaptureSet, use_bounds: bool, memo: dict, stack: set
) -> bool:
    return all(_atom_below(ctx, a, c2, use_bounds, memo, stack) for a in c1)


def _atom_below(
    ctx: Context, a: Capture, goal: CaptureSet, use_bounds: bool, memo: dict, stack: set
) -> bool:
    if a in goal:
        return True
    key = (a, goal)
    if key in memo:
        return memo[key]
    if key in stack:
        raise InternalError(
            "cycle in subcapture expansion", hint=f"atom {a!r} revisited against {goal!r}"
        )
    stack.add(key)
    try:
        result = False
        match a:
            case TermCap(n):
                if isinstance(n, Label):
                    result = False  # labels relate by membership only
                else:
                    b = ctx.lookup(n)
                    if isinstance(b, TermBind) and isinstance(
                        b.type, (CaplessType, ReacapType)
                    ):
                        result = _sub_atoms(ctx, b.type.captures, goal, use_bounds, memo, stack)
            case CaptVarCap(n):
                if use_bounds:
                    b = ctx.lookup(n)
                    if isinstance(b, CaptBind) and b.bound is not None:
                        result = _sub_atoms(ctx, b.bound, goal, use_bounds, memo, stack)
            case ReachCap(_) | CapCap():
                result = False  # only sc-elem applies
        memo[key] = result
        return result
    finally:
        stack.discard(key)


def subcapture_capless(ctx: Context, c1: CaptureSet, c2: CaptureSet) -> bool:
    """C1 <= C2 with sc-var and sc-bound expansion (Capless)."""
    return _sub_atoms(ctx, c1, c2, use_bounds=True, memo={}, stack=set())


def subcapture_reacap(ctx: Context, c1: CaptureSet, c2: CaptureSet) -> bool:
    """C1 <= C2 without the sc-bound rule (Reacap)."""
    return _sub_atoms(ctx, c1, c2, use_bounds=False, memo={}, stack=set())


def bound_subtype(ctx: Context, b1: CaptureBound, b2: CaptureBound) -> bool:
    """B1 <= B2: everything is below *, * is below nothing else."""
    if b2 is None:
        return True
    if b1 is None:
        return False
    return subcapture_capless(ctx, b1, b2)
