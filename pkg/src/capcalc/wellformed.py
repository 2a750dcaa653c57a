"""Contexts and well-formedness for both calculi, plus typedef validation.

Contexts are persistent telescopes: every binding's annotation must be
well-formed in the prefix before it, and the checkers re-establish this at
every extension.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Union

from .diagnostics import (
    Diagnostic,
    E_ARITY,
    E_CAP_COVARIANT,
    E_UNKNOWN_TYPEDEF,
    E_VARIANCE,
)
from .syntax import (
    CAP,
    BreakShape,
    CapCap,
    CaplessExist,
    CaplessShape,
    CaplessType,
    CaptFun,
    CaptureBound,
    CaptureSet,
    CaptVarCap,
    Existential,
    Label,
    Name,
    NeverShape,
    RApplied,
    RBoxed,
    RCaptFun,
    ReachCap,
    ReacapType,
    RFun,
    RShape,
    RTop,
    RTVar,
    RTypeFun,
    TermCap,
    TermFun,
    TopShape,
    TVar,
    TypeFun,
    Variance,
)


@dataclass(frozen=True)
class TermBind:
    name: Name
    type: object  # CaplessType or ReacapType


@dataclass(frozen=True)
class TypeBind:
    name: Name
    bound: object  # CaplessShape or RShape (always RTop in Reacap)


@dataclass(frozen=True)
class CaptBind:
    name: Name
    bound: CaptureBound  # None = unbounded; Reacap bindings are always None


Binding = Union[TermBind, TypeBind, CaptBind]


class Context:
    """An ordered telescope of bindings with O(1) lookup and extension."""

    __slots__ = ("_parent", "_binding", "_index")

    def __init__(
        self,
        parent: Optional["Context"] = None,
        binding: Optional[Binding] = None,
    ):
        self._parent = parent
        self._binding = binding
        index: dict[Name, Binding] = dict(parent._index) if parent else {}
        if binding is not None:
            if binding.name in index:
                raise ValueError(f"duplicate context binding for {binding.name!r}")
            index[binding.name] = binding
        self._index = index

    def extend(self, binding: Binding) -> "Context":
        return Context(self, binding)

    def bind_term(self, name: Name, type_: object) -> "Context":
        return self.extend(TermBind(name, type_))

    def bind_type(self, name: Name, bound: object) -> "Context":
        return self.extend(TypeBind(name, bound))

    def bind_capt(self, name: Name, bound: CaptureBound = None) -> "Context":
        return self.extend(CaptBind(name, bound))

    def lookup(self, name: Name) -> Optional[Binding]:
        return self._index.get(name)

    def __contains__(self, name: Name) -> bool:
        return name in self._index

    def bindings(self) -> Iterator[Binding]:
        out = []
        node: Optional[Context] = self
        while node is not None and node._binding is not None:
            out.append(node._binding)
            node = node._parent
        return iter(reversed(out))

    def domain(self) -> set[Name]:
        return set(self._index)


EMPTY_CONTEXT = Context()


@dataclass(frozen=True)
class TypeDef:
    """A variance-annotated type alias: name = (X1^v1, ..., Xn^vn) -> S.

    The body is stored as a type; a plain shape body carries the empty set.
    """

    name: str
    params: tuple[tuple[Name, Variance], ...]
    body: ReacapType

    @property
    def arity(self) -> int:
        return len(self.params)


class TypeDefContext:
    """Global ordered registry of type definitions; later may use earlier."""

    def __init__(self, defs: tuple[TypeDef, ...] = ()):
        self._defs = defs
        self._by_name = {d.name: d for d in defs}
        if len(self._by_name) != len(defs):
            raise ValueError("duplicate type definition name")

    def add(self, d: TypeDef) -> "TypeDefContext":
        return TypeDefContext(self._defs + (d,))

    def lookup(self, name: str) -> Optional[TypeDef]:
        return self._by_name.get(name)

    def __iter__(self) -> Iterator[TypeDef]:
        return iter(self._defs)

    def __len__(self) -> int:
        return len(self._defs)

    def prefix_before(self, name: str) -> "TypeDefContext":
        out = []
        for d in self._defs:
            if d.name == name:
                break
            out.append(d)
        return TypeDefContext(tuple(out))


EMPTY_DEFS = TypeDefContext()


# ---------------------------------------------------------------------------
# Capless well-formedness
# ---------------------------------------------------------------------------


def wf_cset_capless(ctx: Context, c: CaptureSet) -> bool:
    """Every member names a term or capture binding in ctx (labels are free)."""
    for a in c:
        match a:
            case TermCap(n):
                if isinstance(n, Label):
                    continue
                if not isinstance(ctx.lookup(n), TermBind):
                    return False
            case CaptVarCap(n):
                if not isinstance(ctx.lookup(n), CaptBind):
                    return False
            case _:
                return False  # reach captures and cap do not exist in Capless
    return True


def wf_bound_capless(ctx: Context, b: CaptureBound) -> bool:
    return b is None or wf_cset_capless(ctx, b)


def wf_type_capless(ctx: Context, e: CaplessExist | CaplessShape) -> bool:
    match e:
        case TopShape() | NeverShape():
            return True
        case TVar(n):
            return isinstance(ctx.lookup(n), TypeBind)
        case TermFun(p, pt, res):
            return wf_type_capless(ctx, pt) and wf_type_capless(ctx.bind_term(p, pt), res)
        case TypeFun(p, bound, res):
            return wf_type_capless(ctx, bound) and wf_type_capless(ctx.bind_type(p, bound), res)
        case CaptFun(p, bound, res):
            return wf_bound_capless(ctx, bound) and wf_type_capless(ctx.bind_capt(p, bound), res)
        case BreakShape(s):
            return wf_type_capless(ctx, s)
        case CaplessType(shape, caps):
            return wf_type_capless(ctx, shape) and wf_cset_capless(ctx, caps)
        case Existential(binder, body):
            return wf_type_capless(ctx.bind_capt(binder, None), body)
    raise TypeError(f"wf_type_capless: unhandled {e!r}")


# ---------------------------------------------------------------------------
# Reacap well-formedness
# ---------------------------------------------------------------------------


def wf_cset_reacap(ctx: Context, c: CaptureSet) -> bool:
    for a in c:
        match a:
            case CapCap():
                continue
            case TermCap(n) | ReachCap(n):
                if not isinstance(ctx.lookup(n), TermBind):
                    return False
            case CaptVarCap(n):
                if not isinstance(ctx.lookup(n), CaptBind):
                    return False
    return True


def wf_type_reacap(defs: TypeDefContext, ctx: Context, t: ReacapType | RShape) -> bool:
    match t:
        case RTop():
            return True
        case RTVar(n):
            return isinstance(ctx.lookup(n), TypeBind)
        case RFun(_, p, pt, res):
            return wf_type_reacap(defs, ctx, pt) and wf_type_reacap(
                defs, ctx.bind_term(p, pt), res
            )
        case RTypeFun(p, res):
            return wf_type_reacap(defs, ctx.bind_type(p, RTop()), res)
        case RCaptFun(p, res):
            return wf_type_reacap(defs, ctx.bind_capt(p, None), res)
        case RBoxed(inner):
            return wf_type_reacap(defs, ctx, inner)
        case RApplied(head, args):
            d = defs.lookup(head)
            if d is None or d.arity != len(args):
                return False
            return all(wf_type_reacap(defs, ctx, a) for a in args)
        case ReacapType(shape, caps):
            return wf_type_reacap(defs, ctx, shape) and wf_cset_reacap(ctx, caps)
    raise TypeError(f"wf_type_reacap: unhandled {t!r}")


# ---------------------------------------------------------------------------
# Typedef well-formedness: variance discipline + no covariant cap
# ---------------------------------------------------------------------------


def _wf_def_body(
    defs: TypeDefContext,
    ctx: Context,
    params: dict[Name, Variance],
    t: ReacapType | RShape,
    polarity: Variance,
    where: str,
) -> Optional[Diagnostic]:
    match t:
        case RTop():
            return None
        case RTVar(n):
            if n in params:
                if params[n] != polarity:
                    return Diagnostic(
                        "error",
                        E_VARIANCE,
                        f"parameter {n.text} declared {params[n]} but occurs at "
                        f"{polarity} position in {where}",
                    )
                return None
            if not isinstance(ctx.lookup(n), TypeBind):
                return Diagnostic(
                    "error", E_VARIANCE, f"unbound type variable {n.text} in {where}"
                )
            return None
        case RFun(_, p, pt, res):
            d = _wf_def_body(defs, ctx, params, pt, polarity.flip(), where)
            if d is not None:
                return d
            return _wf_def_body(defs, ctx.bind_term(p, pt), params, res, polarity, where)
        case RTypeFun(p, res):
            return _wf_def_body(defs, ctx.bind_type(p, RTop()), params, res, polarity, where)
        case RCaptFun(p, res):
            return _wf_def_body(defs, ctx.bind_capt(p, None), params, res, polarity, where)
        case RBoxed(inner):
            return _wf_def_body(defs, ctx, params, inner, polarity, where)
        case RApplied(head, args):
            d0 = defs.lookup(head)
            if d0 is None:
                return Diagnostic(
                    "error", E_UNKNOWN_TYPEDEF, f"unknown type definition {head} in {where}"
                )
            if d0.arity != len(args):
                return Diagnostic(
                    "error",
                    E_ARITY,
                    f"{head} expects {d0.arity} argument(s), got {len(args)} in {where}",
                )
            for (_, v), arg in zip(d0.params, args):
                pol = polarity if v.positive else polarity.flip()
                d = _wf_def_body(defs, ctx, params, arg, pol, where)
                if d is not None:
                    return d
            return None
        case ReacapType(shape, caps):
            if polarity.positive and CAP in caps:
                return Diagnostic(
                    "error",
                    E_CAP_COVARIANT,
                    f"cap occurs covariantly in {where}",
                )
            if not wf_cset_reacap(ctx, caps):
                return Diagnostic(
                    "error", E_VARIANCE, f"ill-formed capture set in {where}"
                )
            return _wf_def_body(defs, ctx, params, shape, polarity, where)
    raise TypeError(f"_wf_def_body: unhandled {t!r}")


def wf_typedef(prior: TypeDefContext, d: TypeDef) -> Optional[Diagnostic]:
    params = {n: v for n, v in d.params}
    return _wf_def_body(
        prior, EMPTY_CONTEXT, params, d.body, Variance(True), f"type definition {d.name}"
    )


def wf_typedef_context(defs: TypeDefContext) -> list[Diagnostic]:
    """Check the whole registry; reports the first violating definition."""
    for d in defs:
        diag = wf_typedef(defs.prefix_before(d.name), d)
        if diag is not None:
            return [diag]
    return []
