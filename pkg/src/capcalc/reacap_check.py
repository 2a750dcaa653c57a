"""Type checker for System Reacap.

Reach capabilities are introduced by refinement at variable uses, witnessed
by deep capture sets at call sites, and policed by the @use discipline.
Applied types are compared argument-wise per declared variance and expanded
by dealiasing when their covariant arguments are cap-free.

Subtype checks return a derivation tree; the elaborator adapts terms along
these derivations, so their shape is part of the module's contract.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .capless_check import Derivation, TypingResult
from .diagnostics import (
    E_ARG_MISMATCH,
    E_AVOIDANCE,
    E_CAP_IN_COV_ARG,
    E_CAP_IN_TYPE_ARG,
    E_CAP_UNBOX,
    E_CAPT_ESCAPE,
    E_ILL_FORMED,
    E_NOT_FUNCTION,
    E_REACH_ESCAPE,
    E_TYPE_MISMATCH,
    E_UNBOUND,
    E_UNBOX_USE,
    E_UNKNOWN_TYPEDEF,
    err,
)
from .subcapture import subcapture_reacap
from .syntax import (
    CAP,
    App,
    CApp,
    CapCap,
    CaptureSet,
    CaptVarCap,
    Let,
    Name,
    NameSupply,
    RApplied,
    RBox,
    RBoxed,
    RCaptFun,
    RCLam,
    ReachCap,
    ReacapType,
    RFun,
    RLam,
    RShape,
    RTLam,
    RTop,
    RTVar,
    RTypeFun,
    RUnbox,
    TApp,
    Term,
    TermCap,
    Var,
    alpha_eq,
    cset,
    free_names,
    instantiate_app_result,
    rcapt,
    subst_capt_var,
    subst_term_var,
    subst_type_var,
    subst_type_vars,
)
from .wellformed import (
    Context,
    TermBind,
    TypeBind,
    TypeDefContext,
    wf_cset_reacap,
    wf_type_reacap,
)


@dataclass(frozen=True)
class SubDeriv:
    """A subtyping derivation node, consumed by the elaborator."""

    rule: str  # top | refl | capt | boxed | fun | tfun | cfun | applied | dealias-l | dealias-r
    left: object
    right: object
    children: tuple["SubDeriv", ...] = ()
    meta: dict = field(default_factory=dict, compare=False)


def _print_type(t: object) -> str:
    from .frontend import print_type

    return print_type(t)


class ReacapChecker:
    def __init__(
        self,
        defs: TypeDefContext,
        supply: NameSupply,
        forbid_cap_unbox: bool = False,
    ):
        self.defs = defs
        self.supply = supply
        self.forbid_cap_unbox = forbid_cap_unbox

    # ------------------------------------------------------------------
    # Deep capture sets
    # ------------------------------------------------------------------

    def dcs(self, ctx: Context, t: ReacapType | RShape) -> CaptureSet:
        """All covariantly occurring captures of a type: what's in the box."""
        match t:
            case RTop():
                return cset()
            case RTVar(n):
                b = ctx.lookup(n)
                if isinstance(b, TypeBind):
                    return cset()  # bounds are Top
                return cset()
            case RFun(_, p, _pt, res):
                return self.dcs(ctx, res).difference([TermCap(p), ReachCap(p)])
            case RTypeFun(_, res):
                return self.dcs(ctx, res)
            case RCaptFun(c, res):
                return self.dcs(ctx, res).difference([CaptVarCap(c)])
            case RBoxed(inner):
                return self.dcs(ctx, inner)
            case RApplied(head, args):
                d = self.defs.lookup(head)
                if d is None:
                    raise err(E_UNKNOWN_TYPEDEF, f"unknown type definition {head}")
                out = cset()
                for (_, v), arg in zip(d.params, args):
                    if v.positive:
                        out = out.union(self.dcs(ctx, arg))
                return out
            case ReacapType(shape, caps):
                return self.dcs(ctx, shape).union(caps)
        raise TypeError(f"dcs: unhandled {t!r}")

    # ------------------------------------------------------------------
    # Reach refinement
    # ------------------------------------------------------------------

    def reach_refine(self, d: CaptureSet, t: ReacapType | RShape):
        """Replace covariant occurrences of cap by `d`, skipping functions."""
        match t:
            case RTop() | RTVar():
                return t
            case RFun():
                return t  # neither domain nor codomain is refined
            case RTypeFun(p, res):
                return RTypeFun(p, self.reach_refine(d, res))
            case RCaptFun(p, res):
                return RCaptFun(p, self.reach_refine(d, res))
            case RBoxed(inner):
                return RBoxed(self.reach_refine(d, inner))
            case RApplied(head, args):
                dd = self.defs.lookup(head)
                if dd is None:
                    raise err(E_UNKNOWN_TYPEDEF, f"unknown type definition {head}")
                new_args = tuple(
                    self.reach_refine(d, arg) if v.positive else arg
                    for (_, v), arg in zip(dd.params, args)
                )
                return RApplied(head, new_args)
            case ReacapType(shape, caps):
                if CAP in caps:
                    caps = caps.difference([CAP]).union(d)
                return ReacapType(self.reach_refine(d, shape), caps)
        raise TypeError(f"reach_refine: unhandled {t!r}")

    # ------------------------------------------------------------------
    # Dealiasing
    # ------------------------------------------------------------------

    def dealias(self, ctx: Context, t: ReacapType) -> ReacapType:
        """Expand an applied type one step (cap-free covariant arguments)."""
        shape = t.shape
        if not isinstance(shape, RApplied):
            raise err(E_TYPE_MISMATCH, "dealias applies to applied types only")
        d = self.defs.lookup(shape.head)
        if d is None:
            raise err(E_UNKNOWN_TYPEDEF, f"unknown type definition {shape.head}")
        mapping: dict[Name, object] = {}
        for (pname, v), arg in zip(d.params, shape.args):
            if v.positive and CAP in self.dcs(ctx, arg):
                raise err(
                    E_CAP_IN_COV_ARG,
                    f"cannot expand {shape.head}: covariant argument mentions cap "
                    "in its deep capture set",
                    actual=_print_type(arg),
                )
            mapping[pname] = arg
        body = subst_type_vars(d.body, mapping, self.supply)
        assert isinstance(body, ReacapType)
        if t.captures.is_empty:
            return body
        return ReacapType(body.shape, t.captures)

    def can_dealias(self, ctx: Context, t: ReacapType) -> bool:
        if not isinstance(t.shape, RApplied):
            return False
        d = self.defs.lookup(t.shape.head)
        if d is None:
            return False
        return all(
            not (v.positive and CAP in self.dcs(ctx, arg))
            for (_, v), arg in zip(d.params, t.shape.args)
        )

    # ------------------------------------------------------------------
    # Subtyping (with derivations)
    # ------------------------------------------------------------------

    def subtype(self, ctx: Context, t1: ReacapType, t2: ReacapType) -> Optional[SubDeriv]:
        if alpha_eq(t1, t2):
            return SubDeriv("refl", t1, t2)
        caps_ok = subcapture_reacap(ctx, t1.captures, t2.captures)
        if caps_ok:
            if isinstance(t2.shape, RTop):
                return SubDeriv("capt", t1, t2, (SubDeriv("top", t1.shape, t2.shape),))
            shape = self._subtype_shape(ctx, t1.shape, t2.shape)
            if shape is not None:
                return SubDeriv("capt", t1, t2, (shape,))
        if isinstance(t1.shape, RApplied) and self.can_dealias(ctx, t1):
            child = self.subtype(ctx, self.dealias(ctx, t1), t2)
            if child is not None:
                return SubDeriv("dealias-l", t1, t2, (child,))
        if isinstance(t2.shape, RApplied) and self.can_dealias(ctx, t2):
            child = self.subtype(ctx, t1, self.dealias(ctx, t2))
            if child is not None:
                return SubDeriv("dealias-r", t1, t2, (child,))
        return None

    def _subtype_shape(self, ctx: Context, s1: RShape, s2: RShape) -> Optional[SubDeriv]:
        if isinstance(s2, RTop):
            return SubDeriv("top", s1, s2)
        if alpha_eq(s1, s2):
            return SubDeriv("refl", s1, s2)
        match s1, s2:
            case RBoxed(i1), RBoxed(i2):
                child = self.subtype(ctx, i1, i2)
                if child is None:
                    return None
                return SubDeriv("boxed", s1, s2, (child,))
            case RFun(u1, p1, t1, r1), RFun(u2, p2, t2, r2):
                if u1 and not u2:
                    return None  # use functions cannot pass for plain ones
                dom = self.subtype(ctx, t2, t1)
                if dom is None:
                    return None
                r2r = subst_term_var(r2, p2, p1, self.supply)
                cod = self.subtype(ctx.bind_term(p1, t2), r1, r2r)
                if cod is None:
                    return None
                return SubDeriv(
                    "fun", s1, s2, (dom, cod), {"param": p1, "binder_type": t2}
                )
            case RTypeFun(p1, r1), RTypeFun(p2, r2):
                r2r = subst_type_var(r2, p2, RTVar(p1), self.supply)
                child = self.subtype(ctx.bind_type(p1, RTop()), r1, r2r)
                if child is None:
                    return None
                return SubDeriv("tfun", s1, s2, (child,), {"param": p1})
            case RCaptFun(p1, r1), RCaptFun(p2, r2):
                r2r = subst_capt_var(r2, p2, cset(CaptVarCap(p1)), self.supply)
                child = self.subtype(ctx.bind_capt(p1, None), r1, r2r)
                if child is None:
                    return None
                return SubDeriv("cfun", s1, s2, (child,), {"param": p1})
            case RApplied(h1, a1), RApplied(h2, a2) if h1 == h2:
                d = self.defs.lookup(h1)
                if d is None or len(a1) != len(a2):
                    return None
                children = []
                for (_, v), x, y in zip(d.params, a1, a2):
                    child = self.subtype(ctx, x, y) if v.positive else self.subtype(ctx, y, x)
                    if child is None:
                        return None
                    children.append(child)
                return SubDeriv("applied", s1, s2, tuple(children), {"head": h1})
        return None

    # ------------------------------------------------------------------
    # Synthesis
    # ------------------------------------------------------------------

    def expose_fun(self, ctx: Context, t: ReacapType, span) -> tuple[ReacapType, RShape]:
        """Dealias an applied head until a structural shape appears."""
        steps = 0
        while isinstance(t.shape, RApplied):
            if not self.can_dealias(ctx, t):
                raise err(
                    E_CAP_IN_COV_ARG,
                    "cannot expand the applied type at this elimination: a covariant "
                    "argument mentions cap",
                    span=span,
                    actual=_print_type(t),
                )
            t = self.dealias(ctx, t)
            steps += 1
            if steps > len(self.defs) + 1:
                raise err(E_UNKNOWN_TYPEDEF, "typedef expansion does not terminate", span=span)
        return t, t.shape

    def synth(self, ctx: Context, t: Term) -> TypingResult:
        match t:
            case Var(n, span):
                b = ctx.lookup(n)
                if not isinstance(b, TermBind):
                    raise err(E_UNBOUND, f"unbound variable {n.text}", span=span)
                assert isinstance(b.type, ReacapType)
                refined = self.reach_refine(cset(ReachCap(n)), b.type.shape)
                ty = rcapt(refined, cset(TermCap(n)))
                return self._result("var", t, cset(TermCap(n)), ty)

            case RLam(use, p, pt, body, span):
                if not wf_type_reacap(self.defs, ctx, pt):
                    raise err(
                        E_ILL_FORMED,
                        f"parameter type of {p.text} is not well-formed here",
                        span=span,
                    )
                r = self.synth(ctx.bind_term(p, pt), body)
                if not use and ReachCap(p) in r.use:
                    raise err(
                        E_REACH_ESCAPE,
                        f"the body uses {p.text}*, but the parameter is not "
                        "declared @use",
                        span=span,
                        rule="abs",
                    )
                caps = r.use.difference([TermCap(p), ReachCap(p)])
                ty = rcapt(RFun(use, p, pt, r.type), caps)
                return self._result("abs", t, cset(), ty, r.derivation)

            case RTLam(p, body, span):
                r = self.synth(ctx.bind_type(p, RTop()), body)
                ty = rcapt(RTypeFun(p, r.type), r.use)
                return self._result("tabs", t, cset(), ty, r.derivation)

            case RCLam(p, body, span):
                r = self.synth(ctx.bind_capt(p, None), body)
                if CaptVarCap(p) in r.use:
                    raise err(
                        E_CAPT_ESCAPE,
                        f"capture parameter {p.text} cannot be widened out of the "
                        "body's use set",
                        span=span,
                    )
                ty = rcapt(RCaptFun(p, r.type), r.use)
                return self._result("cabs", t, cset(), ty, r.derivation)

            case RBox(x, span):
                rx = self.synth(ctx, Var(x, span))
                assert isinstance(rx.type, ReacapType)
                ty = rcapt(RBoxed(rx.type), cset())
                return self._result("box", t, cset(), ty, rx.derivation)

            case RUnbox(caps, x, span):
                if not wf_cset_reacap(ctx, caps):
                    raise err(E_ILL_FORMED, "unbox capture set is not well-formed here", span=span)
                if self.forbid_cap_unbox and CAP in caps:
                    raise err(
                        E_CAP_UNBOX,
                        "unboxing a cap-qualified box is forbidden by --forbid-cap-unbox",
                        span=span,
                    )
                rx = self.synth(ctx, Var(x, span))
                assert isinstance(rx.type, ReacapType)
                _, shape = self.expose_fun(ctx, rx.type, span)
                if not isinstance(shape, RBoxed):
                    raise err(
                        E_TYPE_MISMATCH,
                        f"{x.text} is not a boxed value",
                        span=span,
                        rule="unbox",
                        actual=_print_type(rx.type),
                    )
                inner = shape.inner
                if not subcapture_reacap(ctx, inner.captures, caps):
                    from .frontend import print_cset

                    raise err(
                        E_UNBOX_USE,
                        "the unbox annotation does not cover the box's capture set",
                        span=span,
                        rule="unbox",
                        expected=print_cset(inner.captures),
                        actual=print_cset(caps),
                    )
                ty = ReacapType(inner.shape, caps)
                use = rx.use.union(caps)
                return self._result("unbox", t, use, ty, rx.derivation)

            case App(f, a, span):
                rf = self.synth(ctx, Var(f, span))
                assert isinstance(rf.type, ReacapType)
                exposed, head = self.expose_fun(ctx, rf.type, span)
                if not isinstance(head, RFun):
                    raise err(
                        E_NOT_FUNCTION,
                        f"{f.text} is not a function",
                        span=span,
                        actual=_print_type(rf.type),
                    )
                ra = self.synth(ctx, Var(a, span))
                assert isinstance(ra.type, ReacapType)
                argsub = self.subtype(ctx, ra.type, head.param_type)
                if argsub is None:
                    raise err(
                        E_ARG_MISMATCH,
                        f"argument {a.text} does not match the parameter type",
                        span=span,
                        rule="app",
                        expected=_print_type(head.param_type),
                        actual=_print_type(ra.type),
                    )
                arg_dcs = self.dcs(ctx, ra.type.shape)
                ty = instantiate_app_result(head.result, head.param, a, arg_dcs, self.supply)
                use = rf.use.union(ra.use)
                if head.use:
                    use = use.union(arg_dcs)
                deriv = Derivation(
                    "app",
                    t,
                    use,
                    ty,
                    (rf.derivation, ra.derivation),
                    {
                        "fun_type": exposed,
                        "arg_sub": argsub,
                        "arg_dcs": arg_dcs,
                        "arg_type": ra.type,
                    },
                )
                return TypingResult(use, ty, deriv)

            case TApp(f, s, span):
                if not wf_type_reacap(self.defs, ctx, s):
                    raise err(E_ILL_FORMED, "type argument is not well-formed here", span=span)
                rf = self.synth(ctx, Var(f, span))
                assert isinstance(rf.type, ReacapType)
                exposed, head = self.expose_fun(ctx, rf.type, span)
                if not isinstance(head, RTypeFun):
                    raise err(E_NOT_FUNCTION, f"{f.text} is not a type function", span=span)
                if CAP in self.dcs(ctx, s):
                    raise err(
                        E_CAP_IN_TYPE_ARG,
                        "the type argument's deep capture set mentions cap",
                        span=span,
                        rule="tapp",
                        actual=_print_type(s),
                    )
                ty = subst_type_var(head.result, head.param, s, self.supply)
                deriv = Derivation(
                    "tapp", t, rf.use, ty, (rf.derivation,), {"fun_type": exposed, "type_arg": s}
                )
                return TypingResult(rf.use, ty, deriv)

            case CApp(f, d, span):
                if not wf_cset_reacap(ctx, d):
                    raise err(E_ILL_FORMED, "capture argument is not well-formed here", span=span)
                rf = self.synth(ctx, Var(f, span))
                assert isinstance(rf.type, ReacapType)
                exposed, head = self.expose_fun(ctx, rf.type, span)
                if not isinstance(head, RCaptFun):
                    raise err(E_NOT_FUNCTION, f"{f.text} is not a capture function", span=span)
                ty = subst_capt_var(head.result, head.param, d, self.supply)
                deriv = Derivation(
                    "capp", t, rf.use, ty, (rf.derivation,), {"fun_type": exposed, "capt_arg": d}
                )
                return TypingResult(rf.use, ty, deriv)

            case Let(x, rhs, body, span):
                r1 = self.synth(ctx, rhs)
                assert isinstance(r1.type, ReacapType)
                r2 = self.synth(ctx.bind_term(x, r1.type), body)
                use = r1.use.union(r2.use)
                use, ty = self.avoid_let(ctx, x, r1.type, use, r2.type, span)
                return self._result("let", t, use, ty, r1.derivation, r2.derivation)

        raise err(E_TYPE_MISMATCH, f"not a Reacap term: {type(t).__name__}")

    # ------------------------------------------------------------------
    # Let avoidance
    # ------------------------------------------------------------------

    def avoid_let(
        self,
        ctx: Context,
        binder: Name,
        binder_type: ReacapType,
        use: CaptureSet,
        ty: ReacapType,
        span=None,
    ) -> tuple[CaptureSet, ReacapType]:
        """Widen covariant occurrences of the binder to its declared captures;
        reach captures of a local have no widening rule and are errors."""
        atom = TermCap(binder)
        reach = ReachCap(binder)
        if reach in use:
            raise err(
                E_AVOIDANCE,
                f"cannot avoid {binder.text}*: the reach capability of a local "
                "has no wider bound",
                span=span,
            )
        if atom in use:
            use = use.difference([atom]).union(binder_type.captures)
        if binder in free_names(ty):
            ty = self._avoid_in_type(ty, binder, binder_type.captures, True, span)
        return use, ty

    def _avoid_in_type(
        self, node, binder: Name, repl: CaptureSet, covariant: bool, span
    ):
        atom = TermCap(binder)
        reach = ReachCap(binder)

        def fix_cset(c: CaptureSet, cov: bool) -> CaptureSet:
            if reach in c:
                raise err(
                    E_AVOIDANCE,
                    f"cannot avoid {binder.text}*: the reach capability of a local "
                    "has no wider bound",
                    span=span,
                )
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

        def go(n, cov: bool):
            match n:
                case RTop() | RTVar():
                    return n
                case RFun(u, p, pt, res):
                    return RFun(u, p, go(pt, not cov), go(res, cov))
                case RTypeFun(p, res):
                    return RTypeFun(p, go(res, cov))
                case RCaptFun(p, res):
                    return RCaptFun(p, go(res, cov))
                case RBoxed(inner):
                    return RBoxed(go(inner, cov))
                case RApplied(head, args):
                    d = self.defs.lookup(head)
                    if d is None:
                        raise err(E_UNKNOWN_TYPEDEF, f"unknown type definition {head}")
                    return RApplied(
                        head,
                        tuple(
                            go(a, cov if v.positive else not cov)
                            for (_, v), a in zip(d.params, args)
                        ),
                    )
                case ReacapType(shape, caps):
                    return ReacapType(go(shape, cov), fix_cset(caps, cov))
            raise TypeError(f"avoidance: unhandled node {n!r}")

        return go(node, covariant)

    def _result(self, rule, term, use, ty, *children) -> TypingResult:
        return TypingResult(use, ty, Derivation(rule, term, use, ty, tuple(children)))


def synth_reacap(
    defs: TypeDefContext,
    ctx: Context,
    t: Term,
    supply: NameSupply,
    forbid_cap_unbox: bool = False,
) -> TypingResult:
    return ReacapChecker(defs, supply, forbid_cap_unbox).synth(ctx, t)


def subtype_reacap(
    defs: TypeDefContext,
    ctx: Context,
    t1: ReacapType,
    t2: ReacapType,
    supply: NameSupply,
) -> bool:
    return ReacapChecker(defs, supply).subtype(ctx, t1, t2) is not None
