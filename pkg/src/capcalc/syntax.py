"""Abstract syntax shared by both calculi: names, capture sets, types, terms.

Binding is name-based: every binder gets a globally unique serial from a
per-session `NameSupply`, so substitution rarely has to freshen.  All
substitutions are nevertheless capture-avoiding, and all public contracts
hold up to alpha-equivalence.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Union


class Name:
    """An identifier with a printable hint and a disambiguating serial.

    Two names are equal iff their serials are equal.
    """

    __slots__ = ("text", "serial")

    def __init__(self, text: str, serial: int):
        self.text = text
        self.serial = serial

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Name) and self.serial == other.serial

    def __hash__(self) -> int:
        return hash(self.serial)

    def __repr__(self) -> str:
        return f"{self.text}#{self.serial}"


class Label(Name):
    """Runtime identifier of a boundary, carrying its result shape.

    Labels never occur in source programs; they are introduced by the
    `enter` reduction and behave as ordinary (free) term names everywhere
    else, so one substitution engine serves both static and dynamic rules.
    """

    __slots__ = ("shape",)

    def __init__(self, text: str, serial: int, shape: "CaplessShape"):
        super().__init__(text, serial)
        self.shape = shape

    def __repr__(self) -> str:
        return f"label:{self.text}#{self.serial}"


class NameSupply:
    """Isolated fresh-name source; one per checking/evaluation session."""

    def __init__(self, start: int = 0):
        self._next = start

    def fresh(self, text: str) -> Name:
        n = Name(text, self._next)
        self._next += 1
        return n

    def fresh_label(self, text: str, shape: "CaplessShape") -> Label:
        lab = Label(text, self._next, shape)
        self._next += 1
        return lab


@dataclass(frozen=True)
class Span:
    line: int
    col: int
    end_line: int
    end_col: int


# ---------------------------------------------------------------------------
# Captures and capture sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TermCap:
    """A term variable (or runtime label) used as a capture."""

    name: Name


@dataclass(frozen=True)
class CaptVarCap:
    """A capture variable c (Capless and Reacap capture binders)."""

    name: Name


@dataclass(frozen=True)
class ReachCap:
    """A reach capability x* (Reacap only)."""

    name: Name


@dataclass(frozen=True)
class CapCap:
    """The universal capability `cap` (Reacap only)."""


CAP = CapCap()

Capture = Union[TermCap, CaptVarCap, ReachCap, CapCap]

_KIND_RANK = {TermCap: 0, ReachCap: 1, CaptVarCap: 2, CapCap: 3}


def _atom_key(a: Capture) -> tuple:
    rank = _KIND_RANK[type(a)]
    if isinstance(a, CapCap):
        return (rank, 0)
    return (rank, a.name.serial)


@dataclass(frozen=True)
class CaptureSet:
    """A finite set of captures in canonical order (by kind, then serial)."""

    atoms: tuple[Capture, ...]

    def __contains__(self, a: Capture) -> bool:
        return a in self.atoms

    def __iter__(self):
        return iter(self.atoms)

    def __len__(self) -> int:
        return len(self.atoms)

    def union(self, other: "CaptureSet") -> "CaptureSet":
        return cset(*self.atoms, *other.atoms)

    def difference(self, other: Iterable[Capture]) -> "CaptureSet":
        drop = set(other)
        return cset(*(a for a in self.atoms if a not in drop))

    def issubset(self, other: "CaptureSet") -> bool:
        return all(a in other for a in self.atoms)

    @property
    def is_empty(self) -> bool:
        return not self.atoms


def cset(*atoms: Capture) -> CaptureSet:
    seen: dict[tuple, Capture] = {}
    for a in atoms:
        seen.setdefault(_atom_key(a), a)
    return CaptureSet(tuple(seen[k] for k in sorted(seen)))


EMPTY = cset()

# A capture bound: None means unbounded (*), otherwise an upper-bound set.
CaptureBound = Optional[CaptureSet]


# ---------------------------------------------------------------------------
# Capless types: shapes S, types T (shape + captures), existentials E
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TopShape:
    pass


@dataclass(frozen=True)
class TVar:
    name: Name


@dataclass(frozen=True)
class TermFun:
    param: Name
    param_type: "CaplessType"
    result: "CaplessExist"


@dataclass(frozen=True)
class TypeFun:
    param: Name
    bound: "CaplessShape"
    result: "CaplessExist"


@dataclass(frozen=True)
class CaptFun:
    param: Name
    bound: CaptureBound
    result: "CaplessExist"


@dataclass(frozen=True)
class BreakShape:
    """Scoped-capability shape Break[S]; contravariant in S."""

    shape: "CaplessShape"


@dataclass(frozen=True)
class NeverShape:
    """Internal least shape: the algorithmic solution for invoke results."""


CaplessShape = Union[TopShape, TVar, TermFun, TypeFun, CaptFun, BreakShape, NeverShape]

TOP = TopShape()
NEVER = NeverShape()


@dataclass(frozen=True)
class CaplessType:
    """A capturing type S^C; pure types carry the empty set."""

    shape: CaplessShape
    captures: CaptureSet

    @property
    def is_pure(self) -> bool:
        return self.captures.is_empty


@dataclass(frozen=True)
class Existential:
    binder: Name
    body: CaplessType


CaplessExist = Union[Existential, CaplessType]


def pure(shape: CaplessShape) -> CaplessType:
    return CaplessType(shape, EMPTY)


def capt(shape: CaplessShape, captures: CaptureSet) -> CaplessType:
    return CaplessType(shape, captures)


# ---------------------------------------------------------------------------
# Reacap types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RTop:
    pass


@dataclass(frozen=True)
class RTVar:
    name: Name


@dataclass(frozen=True)
class RFun:
    """Dependent function; `use` records the @use annotation."""

    use: bool
    param: Name
    param_type: "ReacapType"
    result: "ReacapType"


@dataclass(frozen=True)
class RTypeFun:
    param: Name  # bound is always Top
    result: "ReacapType"


@dataclass(frozen=True)
class RCaptFun:
    param: Name  # unbounded
    result: "ReacapType"


@dataclass(frozen=True)
class RBoxed:
    inner: "ReacapType"


@dataclass(frozen=True)
class RApplied:
    head: str
    args: tuple["ReacapType", ...]


RShape = Union[RTop, RTVar, RFun, RTypeFun, RCaptFun, RBoxed, RApplied]

RTOP = RTop()


@dataclass(frozen=True)
class ReacapType:
    shape: RShape
    captures: CaptureSet

    @property
    def is_pure(self) -> bool:
        return self.captures.is_empty


def rpure(shape: RShape) -> ReacapType:
    return ReacapType(shape, EMPTY)


def rcapt(shape: RShape, captures: CaptureSet) -> ReacapType:
    return ReacapType(shape, captures)


@dataclass(frozen=True)
class Variance:
    positive: bool

    def flip(self) -> "Variance":
        return Variance(not self.positive)

    def __str__(self) -> str:
        return "+" if self.positive else "-"


COVARIANT = Variance(True)
CONTRAVARIANT = Variance(False)


# ---------------------------------------------------------------------------
# Terms.  Var/App/TApp/CApp/Let are shared by both calculi; the rest are
# dialect-specific.  Spans never take part in equality.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Var:
    name: Name
    span: Optional[Span] = field(default=None, compare=False)


@dataclass(frozen=True)
class App:
    fn: Name
    arg: Name
    span: Optional[Span] = field(default=None, compare=False)


@dataclass(frozen=True)
class TApp:
    fn: Name
    arg: object  # CaplessShape or RShape depending on dialect
    span: Optional[Span] = field(default=None, compare=False)


@dataclass(frozen=True)
class CApp:
    fn: Name
    arg: CaptureSet
    span: Optional[Span] = field(default=None, compare=False)


@dataclass(frozen=True)
class Let:
    binder: Name
    rhs: "Term"
    body: "Term"
    span: Optional[Span] = field(default=None, compare=False)


# Capless-only terms


@dataclass(frozen=True)
class Lam:
    param: Name
    param_type: CaplessType
    body: "Term"
    span: Optional[Span] = field(default=None, compare=False)


@dataclass(frozen=True)
class TLam:
    param: Name
    bound: CaplessShape
    body: "Term"
    span: Optional[Span] = field(default=None, compare=False)


@dataclass(frozen=True)
class CLam:
    param: Name
    bound: CaptureBound
    body: "Term"
    span: Optional[Span] = field(default=None, compare=False)


@dataclass(frozen=True)
class Pack:
    """Existential introduction; `annot` is the optional `as exists c. T`."""

    witness: CaptureSet
    payload: Name
    annot: Optional[Existential] = None
    span: Optional[Span] = field(default=None, compare=False)


@dataclass(frozen=True)
class LetEx:
    capt_binder: Name
    binder: Name
    rhs: "Term"
    body: "Term"
    span: Optional[Span] = field(default=None, compare=False)


@dataclass(frozen=True)
class Boundary:
    shape: CaplessShape
    capt_binder: Name
    binder: Name
    body: "Term"
    span: Optional[Span] = field(default=None, compare=False)


@dataclass(frozen=True)
class Scope:
    """Runtime delimiter for an entered boundary (never in source)."""

    label: Label
    body: "Term"
    span: Optional[Span] = field(default=None, compare=False)


# Reacap-only terms


@dataclass(frozen=True)
class RLam:
    use: bool
    param: Name
    param_type: ReacapType
    body: "Term"
    span: Optional[Span] = field(default=None, compare=False)


@dataclass(frozen=True)
class RTLam:
    param: Name
    body: "Term"
    span: Optional[Span] = field(default=None, compare=False)


@dataclass(frozen=True)
class RCLam:
    param: Name
    body: "Term"
    span: Optional[Span] = field(default=None, compare=False)


@dataclass(frozen=True)
class RBox:
    target: Name
    span: Optional[Span] = field(default=None, compare=False)


@dataclass(frozen=True)
class RUnbox:
    captures: CaptureSet
    target: Name
    span: Optional[Span] = field(default=None, compare=False)


Term = Union[
    Var, App, TApp, CApp, Let,
    Lam, TLam, CLam, Pack, LetEx, Boundary, Scope,
    RLam, RTLam, RCLam, RBox, RUnbox,
]

VALUE_TYPES = (Lam, TLam, CLam, Pack, RLam, RTLam, RCLam, RBox)


def is_value(t: Term) -> bool:
    return isinstance(t, VALUE_TYPES)


def is_answer(t: Term) -> bool:
    return isinstance(t, Var) or is_value(t)


RUNTIME_TYPES = (Scope,)


# ---------------------------------------------------------------------------
# Free names
# ---------------------------------------------------------------------------


def _cset_names(c: CaptureSet) -> set[Name]:
    out: set[Name] = set()
    for a in c:
        if not isinstance(a, CapCap):
            out.add(a.name)
    return out


def free_names(node: object) -> set[Name]:
    """All free term/type/capture names of a type or term, of any dialect."""

    match node:
        case None | TopShape() | RTop() | NeverShape() | CapCap():
            return set()
        case Name():
            return {node}
        case CaptureSet():
            return _cset_names(node)
        case TVar(name) | RTVar(name):
            return {name}
        case TermFun(p, pt, res):
            return free_names(pt) | (free_names(res) - {p})
        case TypeFun(p, bound, res):
            return free_names(bound) | (free_names(res) - {p})
        case CaptFun(p, bound, res):
            return (free_names(bound) if bound is not None else set()) | (free_names(res) - {p})
        case BreakShape(s):
            return free_names(s)
        case CaplessType(shape, caps) | ReacapType(shape, caps):
            return free_names(shape) | _cset_names(caps)
        case Existential(binder, body):
            return free_names(body) - {binder}
        case RFun(_, p, pt, res):
            return free_names(pt) | (free_names(res) - {p})
        case RTypeFun(p, res) | RCaptFun(p, res):
            return free_names(res) - {p}
        case RBoxed(inner):
            return free_names(inner)
        case RApplied(_, args):
            out: set[Name] = set()
            for a in args:
                out |= free_names(a)
            return out
        case Var(name):
            return {name}
        case App(fn, arg):
            return {fn, arg}
        case TApp(fn, arg):
            return {fn} | free_names(arg)
        case CApp(fn, arg):
            return {fn} | _cset_names(arg)
        case Let(x, rhs, body):
            return free_names(rhs) | (free_names(body) - {x})
        case Lam(p, pt, body):
            return free_names(pt) | (free_names(body) - {p})
        case TLam(p, bound, body):
            return free_names(bound) | (free_names(body) - {p})
        case CLam(p, bound, body):
            return (free_names(bound) if bound is not None else set()) | (free_names(body) - {p})
        case Pack(witness, payload, annot):
            return _cset_names(witness) | {payload} | free_names(annot)
        case LetEx(c, x, rhs, body):
            return free_names(rhs) | (free_names(body) - {c, x})
        case Boundary(shape, c, x, body):
            return free_names(shape) | (free_names(body) - {c, x})
        case Scope(_, body):
            return free_names(body)
        case RLam(_, p, pt, body):
            return free_names(pt) | (free_names(body) - {p})
        case RTLam(p, body) | RCLam(p, body):
            return free_names(body) - {p}
        case RBox(target):
            return {target}
        case RUnbox(caps, target):
            return _cset_names(caps) | {target}
    raise TypeError(f"free_names: unhandled node {node!r}")


# ---------------------------------------------------------------------------
# Substitution
#
# One engine handles all three substitution kinds via an environment:
#   term:  Name -> Name                    (renaming; labels are Names too)
#   capt:  Name -> CaptureSet              (capture variable elimination)
#   type:  Name -> shape or type           (type variable elimination)
#   reach: Name -> (CaptureSet, polarity)  (variance-aware reach elimination)
# ---------------------------------------------------------------------------


@dataclass
class _Subst:
    supply: NameSupply
    term: dict[Name, Name]
    capt: dict[Name, CaptureSet]
    tvar: dict[Name, object]
    reach: dict[Name, CaptureSet]
    polarity: bool = True  # True = covariant position

    def _payload_names(self) -> set[Name]:
        out: set[Name] = set()
        out |= set(self.term.values())
        for c in self.capt.values():
            out |= _cset_names(c)
        for t in self.tvar.values():
            out |= free_names(t)
        for c in self.reach.values():
            out |= _cset_names(c)
        return out

    def active(self) -> bool:
        return bool(self.term or self.capt or self.tvar or self.reach)

    def shadow(self, binder: Name) -> "_Subst":
        """Drop mappings for a rebinding of `binder` (defensive)."""
        if (
            binder not in self.term
            and binder not in self.capt
            and binder not in self.tvar
            and binder not in self.reach
        ):
            return self
        return _Subst(
            self.supply,
            {k: v for k, v in self.term.items() if k != binder},
            {k: v for k, v in self.capt.items() if k != binder},
            {k: v for k, v in self.tvar.items() if k != binder},
            {k: v for k, v in self.reach.items() if k != binder},
            self.polarity,
        )

    def flip(self) -> "_Subst":
        s = _Subst(self.supply, self.term, self.capt, self.tvar, self.reach, not self.polarity)
        return s

    def enter_binder(self, binder: Name, body: object) -> tuple[Name, object]:
        """Return a fresh binder and renamed body when capture could occur."""
        sub = self.shadow(binder)
        if binder in sub._payload_names():
            fresh = sub.supply.fresh(binder.text)
            body = rename_term_names(body, {binder: fresh}, sub.supply)
            return fresh, body
        return binder, body


def _subst_cset(s: _Subst, c: CaptureSet) -> CaptureSet:
    out: list[Capture] = []
    for a in c:
        match a:
            case TermCap(n) if n in s.term:
                out.append(TermCap(s.term[n]))
            case CaptVarCap(n) if n in s.capt:
                out.extend(s.capt[n].atoms)
            case ReachCap(n) if n in s.reach:
                if s.polarity:
                    out.extend(s.reach[n].atoms)
                # contravariant reach occurrences are dropped (become {})
            case ReachCap(n) if n in s.term:
                out.append(ReachCap(s.term[n]))
            case _:
                out.append(a)
    return cset(*out)


def _subst_bound(s: _Subst, b: CaptureBound) -> CaptureBound:
    return None if b is None else _subst_cset(s, b)


def _merge_outer(inner: object, outer: CaptureSet) -> object:
    """Fill a type-position hole: a non-empty outer set replaces the inner one.

    Mirrors capture-set replacement (S^C0)^C = S^C when expanding typedef
    bodies whose parameters stand at capturing positions.
    """
    if outer.is_empty:
        return inner
    if isinstance(inner, CaplessType):
        return CaplessType(inner.shape, outer)
    if isinstance(inner, ReacapType):
        return ReacapType(inner.shape, outer)
    raise SubstStructureError("capturing type substituted where a shape is required")


class SubstStructureError(Exception):
    """A capturing type was substituted where only a shape is grammatical."""


def _subst(s: _Subst, node: object) -> object:
    if not s.active():
        return node
    match node:
        case None | TopShape() | RTop() | NeverShape():
            return node
        case CaptureSet():
            return _subst_cset(s, node)
        case TVar(name) | RTVar(name):
            if name in s.tvar:
                repl = s.tvar[name]
                if isinstance(repl, (CaplessType, ReacapType)):
                    # a full type in a strict shape slot is a structural error;
                    # callers at type positions go through _subst_type below
                    raise SubstStructureError(
                        f"capturing type substituted for {name.text} in shape position"
                    )
                return repl
            return node
        case TermFun(p, pt, res):
            pt2 = _subst_type(s.flip(), pt)
            p2, res = s.enter_binder(p, res)
            return TermFun(p2, pt2, _subst(s, res))
        case TypeFun(p, bound, res):
            b2 = _subst(s.flip(), bound)
            p2, res = s.enter_binder(p, res)
            return TypeFun(p2, b2, _subst(s, res))
        case CaptFun(p, bound, res):
            b2 = None if bound is None else _subst_cset(s.flip(), bound)
            p2, res = s.enter_binder(p, res)
            return CaptFun(p2, b2, _subst(s, res))
        case BreakShape(sh):
            return BreakShape(_subst(s.flip(), sh))
        case CaplessType(shape, caps):
            if isinstance(shape, TVar) and shape.name in s.tvar:
                repl = s.tvar[shape.name]
                outer = _subst_cset(s, caps)
                if isinstance(repl, (CaplessType, ReacapType)):
                    return _merge_outer(repl, outer)
                return CaplessType(repl, outer)
            return CaplessType(_subst(s, shape), _subst_cset(s, caps))
        case Existential(binder, body):
            b2, body = s.enter_binder(binder, body)
            return Existential(b2, _subst(s, body))
        case RFun(use, p, pt, res):
            pt2 = _subst_type(s.flip(), pt)
            p2, res = s.enter_binder(p, res)
            return RFun(use, p2, pt2, _subst(s, res))
        case RTypeFun(p, res):
            p2, res = s.enter_binder(p, res)
            return RTypeFun(p2, _subst(s, res))
        case RCaptFun(p, res):
            p2, res = s.enter_binder(p, res)
            return RCaptFun(p2, _subst(s, res))
        case RBoxed(inner):
            return RBoxed(_subst_type(s, inner))
        case RApplied(head, args):
            return RApplied(head, tuple(_subst_type(s, a) for a in args))
        case ReacapType(shape, caps):
            if isinstance(shape, RTVar) and shape.name in s.tvar:
                repl = s.tvar[shape.name]
                outer = _subst_cset(s, caps)
                if isinstance(repl, (CaplessType, ReacapType)):
                    return _merge_outer(repl, outer)
                return ReacapType(repl, outer)
            return ReacapType(_subst(s, shape), _subst_cset(s, caps))
        # ----- terms -----
        case Var(name, span):
            return Var(s.term.get(name, name), span)
        case App(fn, arg, span):
            return App(s.term.get(fn, fn), s.term.get(arg, arg), span)
        case TApp(fn, arg, span):
            return TApp(s.term.get(fn, fn), _subst(s, arg), span)
        case CApp(fn, arg, span):
            return CApp(s.term.get(fn, fn), _subst_cset(s, arg), span)
        case Let(x, rhs, body, span):
            rhs2 = _subst(s, rhs)
            x2, body = s.enter_binder(x, body)
            return Let(x2, rhs2, _subst(s, body), span)
        case Lam(p, pt, body, span):
            pt2 = _subst_type(s.flip(), pt)
            p2, body = s.enter_binder(p, body)
            return Lam(p2, pt2, _subst(s, body), span)
        case TLam(p, bound, body, span):
            b2 = _subst(s.flip(), bound)
            p2, body = s.enter_binder(p, body)
            return TLam(p2, b2, _subst(s, body), span)
        case CLam(p, bound, body, span):
            b2 = None if bound is None else _subst_cset(s.flip(), bound)
            p2, body = s.enter_binder(p, body)
            return CLam(p2, b2, _subst(s, body), span)
        case Pack(witness, payload, annot, span):
            return Pack(
                _subst_cset(s, witness),
                s.term.get(payload, payload),
                _subst(s, annot),
                span,
            )
        case LetEx(c, x, rhs, body, span):
            rhs2 = _subst(s, rhs)
            c2, body = s.enter_binder(c, body)
            x2, body = s.enter_binder(x, body)
            return LetEx(c2, x2, rhs2, _subst(s, body), span)
        case Boundary(shape, c, x, body, span):
            sh2 = _subst(s, shape)
            c2, body = s.enter_binder(c, body)
            x2, body = s.enter_binder(x, body)
            return Boundary(sh2, c2, x2, _subst(s, body), span)
        case Scope(label, body, span):
            return Scope(s.term.get(label, label), _subst(s, body), span)
        case RLam(use, p, pt, body, span):
            pt2 = _subst_type(s.flip(), pt)
            p2, body = s.enter_binder(p, body)
            return RLam(use, p2, pt2, _subst(s, body), span)
        case RTLam(p, body, span):
            p2, body = s.enter_binder(p, body)
            return RTLam(p2, _subst(s, body), span)
        case RCLam(p, body, span):
            p2, body = s.enter_binder(p, body)
            return RCLam(p2, _subst(s, body), span)
        case RBox(target, span):
            return RBox(s.term.get(target, target), span)
        case RUnbox(caps, target, span):
            return RUnbox(_subst_cset(s, caps), s.term.get(target, target), span)
    raise TypeError(f"substitution: unhandled node {node!r}")


def _subst_type(s: _Subst, node: object) -> object:
    """Like _subst but the node sits at a type position (hole filling ok)."""
    return _subst(s, node)


def _mk(supply: NameSupply, **kw) -> _Subst:
    return _Subst(
        supply,
        kw.get("term", {}),
        kw.get("capt", {}),
        kw.get("tvar", {}),
        kw.get("reach", {}),
    )


def rename_term_names(node: object, mapping: dict[Name, Name], supply: NameSupply) -> object:
    """Capture-avoiding simultaneous renaming of term variables ([z:=y])."""
    return _subst(_mk(supply, term=dict(mapping)), node)


def subst_term_var(node: object, old: Name, new: Name, supply: NameSupply) -> object:
    return rename_term_names(node, {old: new}, supply)


def subst_capt_var(node: object, old: Name, repl: CaptureSet, supply: NameSupply) -> object:
    """[c:=D] on a type or term: splice D into every capture set mentioning c."""
    return _subst(_mk(supply, capt={old: repl}), node)


def subst_type_var(node: object, old: Name, repl: object, supply: NameSupply) -> object:
    """[X:=S] (Capless) or [X:=T] (Reacap dealiasing, with hole filling)."""
    return _subst(_mk(supply, tvar={old: repl}), node)


def subst_type_vars(node: object, mapping: dict[Name, object], supply: NameSupply) -> object:
    return _subst(_mk(supply, tvar=dict(mapping)), node)


def subst_reach_variant(
    node: object, old: Name, repl: CaptureSet, supply: NameSupply
) -> object:
    """Variance-aware [x*:=+D]: covariant occurrences become D, contravariant {}.

    The entry polarity is covariant; polarity flips across function parameter
    positions and at contravariant typedef parameters (via the generic walker,
    which flips on every parameter/bound position).
    """
    return _subst(_mk(supply, reach={old: repl}), node)


def instantiate_app_result(
    result: object, param: Name, arg: Name, dcs_of_arg: CaptureSet, supply: NameSupply
) -> object:
    """Reacap app result [z*:=+dcs][z:=y], applied simultaneously."""
    return _subst(_mk(supply, term={param: arg}, reach={param: dcs_of_arg}), result)


# ---------------------------------------------------------------------------
# Alpha equivalence
# ---------------------------------------------------------------------------


def _alpha_cset(env: dict[Name, Name], a: CaptureSet, b: CaptureSet) -> bool:
    def key(atom: Capture, rename: bool) -> tuple:
        match atom:
            case CapCap():
                return ("cap",)
            case TermCap(n):
                return ("t", env.get(n, n) if rename else n)
            case ReachCap(n):
                return ("r", env.get(n, n) if rename else n)
            case CaptVarCap(n):
                return ("c", env.get(n, n) if rename else n)

    left = {key(x, True) for x in a}
    right = {key(x, False) for x in b}
    return left == right


def alpha_eq(a: object, b: object, env: Optional[dict[Name, Name]] = None) -> bool:
    """Structural equality up to consistent renaming of bound names.

    `env` maps left-hand binders to right-hand binders; free names must
    match exactly.
    """
    if env is None:
        env = {}

    def go(a: object, b: object, env: dict[Name, Name]) -> bool:
        if a is b:
            return not env or all(env.get(n, n) == n for n in free_names(a))
        match a, b:
            case (None, None):
                return True
            case (CaptureSet(), CaptureSet()):
                return _alpha_cset(env, a, b)
            case (TopShape(), TopShape()) | (RTop(), RTop()) | (NeverShape(), NeverShape()):
                return True
            case (TVar(n1), TVar(n2)) | (RTVar(n1), RTVar(n2)):
                return env.get(n1, n1) == n2
            case (TermFun(p1, t1, r1), TermFun(p2, t2, r2)):
                return go(t1, t2, env) and go(r1, r2, {**env, p1: p2})
            case (TypeFun(p1, b1, r1), TypeFun(p2, b2, r2)):
                return go(b1, b2, env) and go(r1, r2, {**env, p1: p2})
            case (CaptFun(p1, b1, r1), CaptFun(p2, b2, r2)):
                if (b1 is None) != (b2 is None):
                    return False
                if b1 is not None and not go(b1, b2, env):
                    return False
                return go(r1, r2, {**env, p1: p2})
            case (BreakShape(s1), BreakShape(s2)):
                return go(s1, s2, env)
            case (CaplessType(s1, c1), CaplessType(s2, c2)):
                return go(s1, s2, env) and _alpha_cset(env, c1, c2)
            case (Existential(x1, t1), Existential(x2, t2)):
                return go(t1, t2, {**env, x1: x2})
            case (RFun(u1, p1, t1, r1), RFun(u2, p2, t2, r2)):
                return u1 == u2 and go(t1, t2, env) and go(r1, r2, {**env, p1: p2})
            case (RTypeFun(p1, r1), RTypeFun(p2, r2)):
                return go(r1, r2, {**env, p1: p2})
            case (RCaptFun(p1, r1), RCaptFun(p2, r2)):
                return go(r1, r2, {**env, p1: p2})
            case (RBoxed(i1), RBoxed(i2)):
                return go(i1, i2, env)
            case (RApplied(h1, a1), RApplied(h2, a2)):
                return h1 == h2 and len(a1) == len(a2) and all(
                    go(x, y, env) for x, y in zip(a1, a2)
                )
            case (ReacapType(s1, c1), ReacapType(s2, c2)):
                return go(s1, s2, env) and _alpha_cset(env, c1, c2)
            # terms
            case (Var(n1), Var(n2)):
                return env.get(n1, n1) == n2
            case (App(f1, x1), App(f2, x2)):
                return env.get(f1, f1) == f2 and env.get(x1, x1) == x2
            case (TApp(f1, s1), TApp(f2, s2)):
                return env.get(f1, f1) == f2 and go(s1, s2, env)
            case (CApp(f1, c1), CApp(f2, c2)):
                return env.get(f1, f1) == f2 and _alpha_cset(env, c1, c2)
            case (Let(x1, r1, b1), Let(x2, r2, b2)):
                return go(r1, r2, env) and go(b1, b2, {**env, x1: x2})
            case (Lam(p1, t1, b1), Lam(p2, t2, b2)):
                return go(t1, t2, env) and go(b1, b2, {**env, p1: p2})
            case (TLam(p1, s1, b1), TLam(p2, s2, b2)):
                return go(s1, s2, env) and go(b1, b2, {**env, p1: p2})
            case (CLam(p1, c1, b1), CLam(p2, c2, b2)):
                if (c1 is None) != (c2 is None):
                    return False
                if c1 is not None and not _alpha_cset(env, c1, c2):
                    return False
                return go(b1, b2, {**env, p1: p2})
            case (Pack(w1, p1, a1), Pack(w2, p2, a2)):
                return (
                    _alpha_cset(env, w1, w2)
                    and env.get(p1, p1) == p2
                    and go(a1, a2, env)
                )
            case (LetEx(c1, x1, r1, b1), LetEx(c2, x2, r2, b2)):
                return go(r1, r2, env) and go(b1, b2, {**env, c1: c2, x1: x2})
            case (Boundary(s1, c1, x1, b1), Boundary(s2, c2, x2, b2)):
                return go(s1, s2, env) and go(b1, b2, {**env, c1: c2, x1: x2})
            case (Scope(l1, b1), Scope(l2, b2)):
                return env.get(l1, l1) == l2 and go(b1, b2, env)
            case (RLam(u1, p1, t1, b1), RLam(u2, p2, t2, b2)):
                return u1 == u2 and go(t1, t2, env) and go(b1, b2, {**env, p1: p2})
            case (RTLam(p1, b1), RTLam(p2, b2)):
                return go(b1, b2, {**env, p1: p2})
            case (RCLam(p1, b1), RCLam(p2, b2)):
                return go(b1, b2, {**env, p1: p2})
            case (RBox(t1), RBox(t2)):
                return env.get(t1, t1) == t2
            case (RUnbox(c1, t1), RUnbox(c2, t2)):
                return _alpha_cset(env, c1, c2) and env.get(t1, t1) == t2
        return False

    return go(a, b, env)
