"""Algorithmic subtyping and use-set typing for System Capless.

The judgment synthesizes, for a term in MNF, a use set (the capabilities its
evaluation may use) and an existential type.  Subsumption is folded into the
elimination positions: application arguments, capture-application bounds and
let avoidance.  The scoped-capability extension (boundary / Break / runtime
scopes and labels) is part of the same checker; runtime-only forms are
accepted only when `runtime_ok` is set.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .diagnostics import (
    E_ARG_MISMATCH,
    E_AVOIDANCE,
    E_BOUND_VIOLATION,
    E_CAPT_ESCAPE,
    E_EXIST_ESCAPE,
    E_ILL_FORMED,
    E_NEEDS_LETEX,
    E_NOT_FUNCTION,
    E_SCOPE_LEAK,
    E_TYPE_MISMATCH,
    E_UNBOUND,
    CheckError,
    err,
)
from .subcapture import bound_subtype, subcapture_capless
from .syntax import (
    App,
    Boundary,
    BreakShape,
    CApp,
    CaplessExist,
    CaplessShape,
    CaplessType,
    CaptFun,
    CaptureBound,
    CaptureSet,
    CaptVarCap,
    CLam,
    Existential,
    Label,
    Lam,
    Let,
    LetEx,
    Name,
    NameSupply,
    NeverShape,
    Pack,
    Scope,
    TApp,
    TermCap,
    TermFun,
    TLam,
    TopShape,
    TVar,
    Term,
    TypeFun,
    Var,
    alpha_eq,
    capt,
    cset,
    free_names,
    is_value,
    pure,
    subst_capt_var,
    subst_term_var,
    subst_type_var,
)
from .wellformed import (
    CaptBind,
    Context,
    TermBind,
    TypeBind,
    wf_bound_capless,
    wf_cset_capless,
    wf_type_capless,
)


@dataclass(frozen=True)
class Derivation:
    """A node of the retained typing derivation (rule name + premises)."""

    rule: str
    term: object
    use: CaptureSet
    type: CaplessExist
    children: tuple["Derivation", ...] = ()
    meta: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class TypingResult:
    use: CaptureSet
    type: CaplessExist
    derivation: Derivation


def _print_type(t: object) -> str:
    from .frontend import print_type

    return print_type(t)


class CaplessChecker:
    def __init__(self, supply: NameSupply, runtime_ok: bool = False):
        self.supply = supply
        self.runtime_ok = runtime_ok

    # ------------------------------------------------------------------
    # Subtyping
    # ------------------------------------------------------------------

    def expose(self, ctx: Context, shape: CaplessShape) -> CaplessShape:
        """Chase type-variable bounds until a structural head appears."""
        seen = set()
        while isinstance(shape, TVar):
            if shape.name in seen:
                break
            seen.add(shape.name)
            b = ctx.lookup(shape.name)
            if not isinstance(b, TypeBind):
                break
            shape = b.bound
        return shape

    def subtype_exist(self, ctx: Context, e1: CaplessExist, e2: CaplessExist) -> bool:
        if isinstance(e1, CaplessType) and isinstance(e1.shape, NeverShape):
            return True
        if isinstance(e1, Existential) and isinstance(e2, Existential):
            body2 = subst_capt_var(
                e2.body, e2.binder, cset(CaptVarCap(e1.binder)), self.supply
            )
            return self.subtype_type(ctx.bind_capt(e1.binder, None), e1.body, body2)
        if isinstance(e1, CaplessType) and isinstance(e2, CaplessType):
            return self.subtype_type(ctx, e1, e2)
        return False

    def subtype_type(self, ctx: Context, t1: CaplessType, t2: CaplessType) -> bool:
        if isinstance(t1.shape, NeverShape):
            return True
        return subcapture_capless(ctx, t1.captures, t2.captures) and self.subtype_shape(
            ctx, t1.shape, t2.shape
        )

    def subtype_shape(self, ctx: Context, s1: CaplessShape, s2: CaplessShape) -> bool:
        if isinstance(s1, NeverShape) or isinstance(s2, TopShape):
            return True
        if alpha_eq(s1, s2):
            return True
        if isinstance(s1, TVar):
            b = ctx.lookup(s1.name)
            if isinstance(b, TypeBind):
                return self.subtype_shape(ctx, b.bound, s2)
            return False
        match s1, s2:
            case TermFun(p1, t1, r1), TermFun(p2, t2, r2):
                if not self.subtype_type(ctx, t2, t1):
                    return False
                r2r = subst_term_var(r2, p2, p1, self.supply)
                return self.subtype_exist(ctx.bind_term(p1, t2), r1, r2r)
            case TypeFun(p1, b1, r1), TypeFun(p2, b2, r2):
                if not self.subtype_shape(ctx, b2, b1):
                    return False
                r2r = subst_type_var(r2, p2, TVar(p1), self.supply)
                return self.subtype_exist(ctx.bind_type(p1, b2), r1, r2r)
            case CaptFun(p1, b1, r1), CaptFun(p2, b2, r2):
                if not bound_subtype(ctx, b2, b1):
                    return False
                r2r = subst_capt_var(r2, p2, cset(CaptVarCap(p1)), self.supply)
                return self.subtype_exist(ctx.bind_capt(p1, b2), r1, r2r)
            case BreakShape(i1), BreakShape(i2):
                return self.subtype_shape(ctx, i2, i1)
        return False

    # ------------------------------------------------------------------
    # Let avoidance
    # ------------------------------------------------------------------

    def _avoid_in_type(
        self,
        node: object,
        binder: Name,
        repl: CaptureSet,
        covariant: bool,
        span,
    ) -> object:
        """Replace covariant capture occurrences of `binder` by `repl`."""
        atom = TermCap(binder)

        def fix_cset(c: CaptureSet, cov: bool) -> CaptureSet:
            if atom not in c:
                return c
            if not cov:
                raise err(
                    E_AVOIDANCE,
                    f"cannot avoid {binder.text}: it occurs in a contravariant "
                    "capture position of the result type",
                    span=span,
                )
            return c.difference([atom]).union(repl)

        def go(n: object, cov: bool) -> object:
            match n:
                case TopShape() | NeverShape() | TVar():
                    return n
                case TermFun(p, pt, res):
                    return TermFun(p, go(pt, not cov), go(res, cov))
                case TypeFun(p, b, res):
                    return TypeFun(p, go(b, not cov), go(res, cov))
                case CaptFun(p, b, res):
                    b2 = None if b is None else fix_cset(b, not cov)
                    return CaptFun(p, b2, go(res, cov))
                case BreakShape(s):
                    return BreakShape(go(s, not cov))
                case CaplessType(shape, caps):
                    return CaplessType(go(shape, cov), fix_cset(caps, cov))
                case Existential(b, body):
                    return Existential(b, go(body, cov))
            raise TypeError(f"avoidance: unhandled node {n!r}")

        return go(node, covariant)

    def avoid_let(
        self,
        ctx: Context,
        binder: Name,
        binder_type: CaplessType,
        use: CaptureSet,
        ty: CaplessExist,
        span=None,
    ) -> tuple[CaptureSet, CaplessExist]:
        """Eliminate a let binder from the use set and result type by widening
        to its declared captures (justified by sc-var / capt subsumption)."""
        atom = TermCap(binder)
        if atom in use:
            use = use.difference([atom]).union(binder_type.captures)
        if binder in free_names(ty):
            ty = self._avoid_in_type(ty, binder, binder_type.captures, True, span)
        return use, ty

    # ------------------------------------------------------------------
    # Synthesis
    # ------------------------------------------------------------------

    def synth(self, ctx: Context, t: Term) -> TypingResult:
        match t:
            case Var(n, span):
                if isinstance(n, Label):
                    if not self.runtime_ok:
                        raise err(E_UNBOUND, "labels cannot occur in source programs", span=span)
                    ty = capt(BreakShape(n.shape), cset(TermCap(n)))
                    return self._result("label", t, cset(TermCap(n)), ty)
                b = ctx.lookup(n)
                if not isinstance(b, TermBind):
                    raise err(E_UNBOUND, f"unbound variable {n.text}", span=span)
                assert isinstance(b.type, CaplessType)
                ty = capt(b.type.shape, cset(TermCap(n)))
                return self._result("var", t, cset(TermCap(n)), ty)

            case Lam(p, pt, body, span):
                if not wf_type_capless(ctx, pt):
                    raise err(
                        E_ILL_FORMED,
                        f"parameter type of {p.text} is not well-formed here",
                        span=span,
                    )
                r = self.synth(ctx.bind_term(p, pt), body)
                fun_caps = r.use.difference([TermCap(p)])
                ty = capt(TermFun(p, pt, r.type), fun_caps)
                return self._result("abs", t, cset(), ty, r.derivation)

            case TLam(p, bound, body, span):
                if not wf_type_capless(ctx, bound):
                    raise err(E_ILL_FORMED, f"bound of {p.text} is not well-formed here", span=span)
                r = self.synth(ctx.bind_type(p, bound), body)
                ty = capt(TypeFun(p, bound, r.type), r.use)
                return self._result("tabs", t, cset(), ty, r.derivation)

            case CLam(p, bound, body, span):
                if not wf_bound_capless(ctx, bound):
                    raise err(E_ILL_FORMED, f"bound of {p.text} is not well-formed here", span=span)
                r = self.synth(ctx.bind_capt(p, bound), body)
                caps = r.use
                if CaptVarCap(p) in caps:
                    if bound is None:
                        raise err(
                            E_CAPT_ESCAPE,
                            f"capture parameter {p.text} is unbounded and cannot be "
                            "widened out of the body's use set",
                            span=span,
                        )
                    caps = caps.difference([CaptVarCap(p)]).union(bound)
                ty = capt(CaptFun(p, bound, r.type), caps)
                return self._result("cabs", t, cset(), ty, r.derivation)

            case Pack(witness, payload, annot, span):
                if not wf_cset_capless(ctx, witness):
                    raise err(E_ILL_FORMED, "pack witness set is not well-formed here", span=span)
                rp = self.synth(ctx, Var(payload, span))
                assert isinstance(rp.type, CaplessType)
                if annot is None:
                    c = self.supply.fresh("c")
                    ty: Existential = Existential(c, rp.type)
                else:
                    if not wf_type_capless(ctx, annot):
                        raise err(
                            E_ILL_FORMED, "pack ascription is not well-formed here", span=span
                        )
                    target = subst_capt_var(annot.body, annot.binder, witness, self.supply)
                    if not self.subtype_type(ctx, rp.type, target):
                        raise err(
                            E_TYPE_MISMATCH,
                            "pack payload does not fit the ascribed existential "
                            "at the given witness",
                            span=span,
                            rule="pack",
                            expected=_print_type(target),
                            actual=_print_type(rp.type),
                        )
                    ty = annot
                return self._result("pack", t, cset(), ty, rp.derivation)

            case App(f, a, span):
                rf = self.synth(ctx, Var(f, span))
                assert isinstance(rf.type, CaplessType)
                head = self.expose(ctx, rf.type.shape)
                ra = self.synth(ctx, Var(a, span))
                assert isinstance(ra.type, CaplessType)
                use = rf.use.union(ra.use)
                match head:
                    case TermFun(z, pt, res):
                        if not self.subtype_type(ctx, ra.type, pt):
                            raise err(
                                E_ARG_MISMATCH,
                                f"argument {a.text} does not match the parameter type",
                                span=span,
                                rule="app",
                                expected=_print_type(pt),
                                actual=_print_type(ra.type),
                            )
                        ty = subst_term_var(res, z, a, self.supply)
                        return self._result("app", t, use, ty, rf.derivation, ra.derivation)
                    case BreakShape(s):
                        if not self.subtype_type(ctx, ra.type, pure(s)):
                            raise err(
                                E_ARG_MISMATCH,
                                f"break argument {a.text} does not match the boundary's "
                                "result shape",
                                span=span,
                                rule="invoke",
                                expected=_print_type(pure(s)),
                                actual=_print_type(ra.type),
                            )
                        return self._result(
                            "invoke", t, use, pure(NeverShape()), rf.derivation, ra.derivation
                        )
                    case _:
                        raise err(
                            E_NOT_FUNCTION,
                            f"{f.text} is not a function",
                            span=span,
                            actual=_print_type(rf.type),
                        )

            case TApp(f, s, span):
                if not wf_type_capless(ctx, s):
                    raise err(E_ILL_FORMED, "type argument is not well-formed here", span=span)
                rf = self.synth(ctx, Var(f, span))
                assert isinstance(rf.type, CaplessType)
                head = self.expose(ctx, rf.type.shape)
                if not isinstance(head, TypeFun):
                    raise err(E_NOT_FUNCTION, f"{f.text} is not a type function", span=span)
                if not self.subtype_shape(ctx, s, head.bound):
                    raise err(
                        E_ARG_MISMATCH,
                        "type argument does not respect the parameter bound",
                        span=span,
                        rule="tapp",
                        expected=_print_type(head.bound),
                        actual=_print_type(s),
                    )
                ty = subst_type_var(head.result, head.param, s, self.supply)
                return self._result("tapp", t, rf.use, ty, rf.derivation)

            case CApp(f, d, span):
                if not wf_cset_capless(ctx, d):
                    raise err(E_ILL_FORMED, "capture argument is not well-formed here", span=span)
                rf = self.synth(ctx, Var(f, span))
                assert isinstance(rf.type, CaplessType)
                head = self.expose(ctx, rf.type.shape)
                if not isinstance(head, CaptFun):
                    raise err(E_NOT_FUNCTION, f"{f.text} is not a capture function", span=span)
                if not bound_subtype(ctx, d, head.bound):
                    from .frontend import print_cset

                    raise err(
                        E_BOUND_VIOLATION,
                        "capture argument exceeds the parameter bound",
                        span=span,
                        rule="capp",
                        expected="*" if head.bound is None else print_cset(head.bound),
                        actual=print_cset(d),
                    )
                ty = subst_capt_var(head.result, head.param, d, self.supply)
                return self._result("capp", t, rf.use, ty, rf.derivation)

            case Let(x, rhs, body, span):
                r1 = self.synth(ctx, rhs)
                if isinstance(r1.type, Existential):
                    raise err(
                        E_NEEDS_LETEX,
                        f"the bound expression has an existential type; "
                        f"unpack it with let [c, {x.text}] = ... in ...",
                        span=span,
                        actual=_print_type(r1.type),
                    )
                r2 = self.synth(ctx.bind_term(x, r1.type), body)
                use = r1.use.union(r2.use)
                use, ty = self.avoid_let(ctx, x, r1.type, use, r2.type, span)
                return self._result("let", t, use, ty, r1.derivation, r2.derivation)

            case LetEx(c, x, rhs, body, span):
                r1 = self.synth(ctx, rhs)
                if not isinstance(r1.type, Existential):
                    raise err(
                        E_TYPE_MISMATCH,
                        "the bound expression of an existential let must have an "
                        "existential type",
                        span=span,
                        rule="let-e",
                        actual=_print_type(r1.type),
                    )
                inner = subst_capt_var(
                    r1.type.body, r1.type.binder, cset(CaptVarCap(c)), self.supply
                )
                ctx2 = ctx.bind_capt(c, None).bind_term(x, inner)
                r2 = self.synth(ctx2, body)
                use = r1.use.union(r2.use)
                use, ty = self.avoid_let(ctx.bind_capt(c, None), x, inner, use, r2.type, span)
                if CaptVarCap(c) in use or c in free_names(ty):
                    raise err(
                        E_EXIST_ESCAPE,
                        f"the existential witness {c.text} escapes in the "
                        "result of the unpacking let",
                        span=span,
                        actual=_print_type(ty),
                    )
                return self._result("let-e", t, use, ty, r1.derivation, r2.derivation)

            case Boundary(s, c, x, body, span):
                if not wf_type_capless(ctx, s):
                    raise err(
                        E_SCOPE_LEAK,
                        "the boundary's result shape must be well-formed in the "
                        "outer context",
                        span=span,
                    )
                ctx2 = ctx.bind_capt(c, None).bind_term(
                    x, capt(BreakShape(s), cset(CaptVarCap(c)))
                )
                r = self.synth(ctx2, body)
                if not self.subtype_exist(ctx2, r.type, pure(s)):
                    leaked = {c, x} & free_names(r.type)
                    if leaked:
                        raise err(
                            E_SCOPE_LEAK,
                            "the boundary's capability escapes in its result type",
                            span=span,
                            actual=_print_type(r.type),
                        )
                    raise err(
                        E_TYPE_MISMATCH,
                        "boundary body does not produce the declared result shape",
                        span=span,
                        rule="boundary",
                        expected=_print_type(pure(s)),
                        actual=_print_type(r.type),
                    )
                use = r.use.difference([TermCap(x), CaptVarCap(c)])
                return self._result("boundary", t, use, pure(s), r.derivation)

            case Scope(label, body, span):
                if not self.runtime_ok:
                    raise err(E_UNBOUND, "scope frames cannot occur in source programs", span=span)
                r = self.synth(ctx, body)
                return self._result("scope", t, r.use, r.type, r.derivation)

        raise err(E_TYPE_MISMATCH, f"not a Capless term: {type(t).__name__}")

    def _result(
        self, rule: str, term: Term, use: CaptureSet, ty: CaplessExist, *children: Derivation
    ) -> TypingResult:
        return TypingResult(use, ty, Derivation(rule, term, use, ty, tuple(children)))


def synth_capless(ctx: Context, t: Term, supply: NameSupply) -> TypingResult:
    """Type a source Capless term (boundary allowed, runtime forms rejected)."""
    return CaplessChecker(supply).synth(ctx, t)


def synth_scoped(ctx: Context, t: Term, supply: NameSupply) -> TypingResult:
    """Type a runtime state's focus: scopes and labels are in play."""
    return CaplessChecker(supply, runtime_ok=True).synth(ctx, t)


def subtype_capless(ctx: Context, e1: CaplessExist, e2: CaplessExist, supply: NameSupply) -> bool:
    return CaplessChecker(supply).subtype_exist(ctx, e1, e2)
