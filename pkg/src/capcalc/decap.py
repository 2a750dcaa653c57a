"""Type-preserving elaboration of Reacap into Capless.

Capture sets and types are encoded under a translation context
(interpretation of cap, plus maps for plain and reach capabilities); terms
are elaborated by walking the retained typing derivation.  Source subtyping
steps become term adaptations (eta-expansions through capture lambdas, box
re-wrapping, identity across dealiasing).  The output is re-checked by the
Capless checker and compared against the encoded source type.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

from .capless_check import CaplessChecker, Derivation, synth_capless
from .diagnostics import (
    E_NOT_PROPER,
    E_TRANSLATE_MISMATCH,
    E_TRANSLATE_UNSUPPORTED,
    E_UNMAPPED_CAPTURE,
    CheckError,
    InternalError,
    err,
)
from .reacap_check import ReacapChecker, SubDeriv, synth_reacap
from .subcapture import subcapture_capless
from .syntax import (
    CAP,
    App,
    CApp,
    CapCap,
    CaplessExist,
    CaplessShape,
    CaplessType,
    CaptFun,
    CaptureBound,
    CaptureSet,
    CaptVarCap,
    CLam,
    Existential,
    Lam,
    Let,
    LetEx,
    Name,
    NameSupply,
    Pack,
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
    is_answer,
    pure,
    subst_type_vars,
)
from .wellformed import (
    CaptBind,
    Context,
    EMPTY_CONTEXT,
    TermBind,
    TypeBind,
    TypeDefContext,
    wf_cset_capless,
)


@dataclass(frozen=True)
class TranslationContext:
    """Interpretation of cap plus capability maps (target-side sets)."""

    interp: CaptureSet
    rho: dict[Name, CaptureSet]
    rho_star: dict[Name, CaptureSet]

    def with_interp(self, d: CaptureSet) -> "TranslationContext":
        return TranslationContext(d, self.rho, self.rho_star)

    def bind(
        self,
        name: Name,
        plain: CaptureSet,
        star: Optional[CaptureSet] = None,
    ) -> "TranslationContext":
        rho = dict(self.rho)
        rho[name] = plain
        rho_star = self.rho_star
        if star is not None:
            rho_star = dict(self.rho_star)
            rho_star[name] = star
        return TranslationContext(self.interp, rho, rho_star)


def empty_translation_context() -> TranslationContext:
    return TranslationContext(cset(), {}, {})


def check_proper(
    tau: TranslationContext, source: Context, target: Context
) -> Optional[str]:
    """Validate the properness conditions; returns a reason when they fail."""
    for c in [tau.interp, *tau.rho.values(), *tau.rho_star.values()]:
        if not wf_cset_capless(target, c):
            return "a translation-context capture set is not well-formed in the target context"
    dom = target.domain()
    for n in dom:
        b = target.lookup(n)
        if isinstance(b, TermBind) and n not in tau.rho:
            return f"target binding {n.text} has no plain capability map entry"
    images = [tuple(c.atoms) for c in tau.rho_star.values()]
    if len(set(images)) != len(images):
        return "the reach capability map is not injective"
    for c in tau.rho_star.values():
        if len(c) != 1:
            return "a reach capability image is not a singleton"
    return None


class Chain:
    """Accumulates MNF let bindings around a final term."""

    def __init__(self, supply: NameSupply):
        self.supply = supply
        self.bindings: list[tuple] = []

    def push(self, hint: str, term: Term) -> Name:
        n = self.supply.fresh(hint)
        self.bindings.append(("let", n, term))
        return n

    def push_ex(self, capt_hint: str, hint: str, term: Term) -> tuple[Name, Name]:
        c = self.supply.fresh(capt_hint)
        n = self.supply.fresh(hint)
        self.bindings.append(("letex", c, n, term))
        return c, n

    def wrap(self, final: Term) -> Term:
        t = final
        for entry in reversed(self.bindings):
            if entry[0] == "let":
                _, n, rhs = entry
                t = Let(n, rhs, t)
            else:
                _, c, n, rhs = entry
                t = LetEx(c, n, rhs, t)
        return t


@dataclass
class TransOut:
    term: Term
    ty: CaplessExist
    interp: CaptureSet  # D': the interpretation the type is encoded under
    wrapped: bool  # the type is an existential per the app/let classification


class Translator:
    def __init__(self, defs: TypeDefContext, supply: NameSupply):
        self.defs = defs
        self.supply = supply
        self.checker = ReacapChecker(defs, supply)

    # ------------------------------------------------------------------
    # Capture set and type encoding
    # ------------------------------------------------------------------

    def encode_cset(self, tau: TranslationContext, c: CaptureSet) -> CaptureSet:
        out = cset()
        for a in c:
            match a:
                case CapCap():
                    out = out.union(tau.interp)
                case TermCap(n) | CaptVarCap(n):
                    if n not in tau.rho:
                        raise err(E_UNMAPPED_CAPTURE, f"no capability mapping for {n.text}")
                    out = out.union(tau.rho[n])
                case ReachCap(n):
                    if n not in tau.rho_star:
                        raise err(
                            E_UNMAPPED_CAPTURE, f"no reach capability mapping for {n.text}*"
                        )
                    out = out.union(tau.rho_star[n])
        return out

    def encode_bound(self, tau: TranslationContext, c: CaptureSet) -> CaptureBound:
        """Parameter bounds interpret cap as the unbounded bound."""
        if CAP in c:
            return None
        return self.encode_cset(tau, c)

    def encode_type(
        self,
        tau: TranslationContext,
        t: ReacapType,
        env: Optional[dict[Name, CaplessType]] = None,
    ) -> CaplessType:
        env = env or {}
        shape = t.shape
        match shape:
            case RTVar(n) if n in env:
                spliced = env[n]
                if t.captures.is_empty:
                    return spliced
                return CaplessType(spliced.shape, self.encode_cset(tau, t.captures))
            case RFun():
                return pure(
                    self.encode_fun(tau, shape, self.encode_cset(tau, t.captures), env)
                )
            case RApplied(head, args):
                d = self.defs.lookup(head)
                if d is None:
                    raise err(E_UNMAPPED_CAPTURE, f"unknown type definition {head}")
                raw: dict[Name, object] = {}
                enc: dict[Name, CaplessType] = dict(env)
                for (pname, v), arg in zip(d.params, args):
                    if v.positive:
                        enc[pname] = self.encode_type(tau, arg, env)
                    else:
                        raw[pname] = arg
                body = subst_type_vars(d.body, raw, self.supply)
                assert isinstance(body, ReacapType)
                inner = self.encode_type(tau, body, enc)
                if t.captures.is_empty:
                    return inner
                return CaplessType(inner.shape, self.encode_cset(tau, t.captures))
            case _:
                return CaplessType(
                    self.encode_shape(tau, shape, env), self.encode_cset(tau, t.captures)
                )

    def encode_shape(
        self, tau: TranslationContext, s: RShape, env: dict[Name, CaplessType]
    ) -> CaplessShape:
        match s:
            case RTop():
                return TopShape()
            case RTVar(n):
                if n in env:
                    spliced = env[n]
                    if spliced.is_pure:
                        return spliced.shape
                    raise InternalError(
                        "capturing type argument spliced into a pure shape position"
                    )
                return TVar(n)
            case RTypeFun(p, res):
                return TypeFun(p, TopShape(), self.encode_type(tau, res, env))
            case RCaptFun(p, res):
                tau2 = tau.bind(p, cset(CaptVarCap(p)))
                return CaptFun(p, None, self.encode_type(tau2, res, env))
            case RBoxed(inner):
                enc = self.encode_type(tau, inner, env)
                x1 = self.supply.fresh("B")
                x2 = self.supply.fresh("B")
                return TypeFun(
                    x1,
                    TopShape(),
                    CaplessType(TypeFun(x2, TopShape(), enc), enc.captures),
                )
            case RFun():
                return self.encode_fun(tau, s, cset(), env)
        raise InternalError(f"encode_shape: unhandled {s!r}")

    def encode_fun(
        self,
        tau: TranslationContext,
        s: RFun,
        cf_encoded: CaptureSet,
        env: dict[Name, CaplessType],
    ) -> CaplessShape:
        """Encode a function: two capture parameters (the parameter's own
        captures and its reach), an existential result, and the function's
        captures augmented per the use annotation."""
        x = s.param
        c_x = self.supply.fresh(f"c{x.text}")
        c_xs = self.supply.fresh(f"c{x.text}s")
        param_shape, bound = self._encode_param(tau, c_xs, s.param_type, env)
        tau_body = tau.bind(x, cset(CaptVarCap(c_x)), cset(CaptVarCap(c_xs)))
        c = self.supply.fresh("c")
        result = self.encode_type(
            tau_body.with_interp(cset(CaptVarCap(c))), s.result, env
        )
        result_e: CaplessExist = (
            Existential(c, result) if c in free_names(result) else result
        )
        cf = cf_encoded.union(cset(CaptVarCap(c_x)))
        if s.use:
            cf = cf.union(cset(CaptVarCap(c_xs)))
        inner = capt(
            TermFun(x, CaplessType(param_shape, cset(CaptVarCap(c_x))), result_e), cf
        )
        return CaptFun(c_x, bound, pure(CaptFun(c_xs, None, inner)))

    def _encode_param(
        self,
        tau: TranslationContext,
        c_xs: Name,
        pt: ReacapType,
        env: dict[Name, CaplessType],
    ) -> tuple[CaplessShape, CaptureBound]:
        """Split a parameter type into its encoded shape (under the reach
        interpretation) and its capture bound (cap maps to unbounded)."""
        if isinstance(pt.shape, RTVar) and pt.shape.name in env:
            spliced = env[pt.shape.name]
            if pt.captures.is_empty:
                return spliced.shape, spliced.captures
            return spliced.shape, self.encode_bound(tau, pt.captures)
        tau_star = tau.with_interp(cset(CaptVarCap(c_xs)))
        if isinstance(pt.shape, RApplied):
            enc = self.encode_type(tau_star, ReacapType(pt.shape, cset()), env)
            bound_extra = enc.captures  # expansions may surface their own captures
            bound = self.encode_bound(tau, pt.captures)
            if bound is not None and not bound_extra.is_empty:
                bound = bound.union(bound_extra)
            return enc.shape, bound
        return (
            self.encode_shape(tau_star, pt.shape, env),
            self.encode_bound(tau, pt.captures),
        )

    def wrap_result(self, tau: TranslationContext, t: ReacapType) -> CaplessExist:
        """The Theorem-6.3 type of an application or let subject: the source
        type encoded under a fresh existential interpretation, wrapped when
        the witness is actually used."""
        c = self.supply.fresh("c")
        enc = self.encode_type(tau.with_interp(cset(CaptVarCap(c))), t)
        if c in free_names(enc):
            return Existential(c, enc)
        return enc

    # ------------------------------------------------------------------
    # Term translation (directed by the retained derivation)
    # ------------------------------------------------------------------

    def translate(
        self, tau: TranslationContext, ctx: Context, deriv: Derivation
    ) -> TransOut:
        match deriv.rule:
            case "var":
                x = deriv.term.name
                # a binder without a reach entry (plain let) has a cap-free
                # type, so the interpretation is redundant for its encoding
                d_out = tau.rho_star.get(x, tau.interp)
                ty = self.encode_type(tau.with_interp(d_out), deriv.type)
                return TransOut(Var(x), ty, d_out, False)

            case "box":
                payload = self.translate(tau, ctx, deriv.children[0])
                x1 = self.supply.fresh("B")
                x2 = self.supply.fresh("B")
                term = TLam(x1, TopShape(), TLam(x2, TopShape(), payload.term))
                ty = self.encode_type(tau, deriv.type)
                return TransOut(term, ty, tau.interp, False)

            case "unbox":
                target = self.translate(tau, ctx, deriv.children[0])
                ch = Chain(self.supply)
                z0 = ch.push("z", target.term)
                z1 = ch.push("z", TApp(z0, TopShape()))
                term = ch.wrap(TApp(z1, TopShape()))
                ty = self.encode_type(tau, deriv.type)
                return TransOut(term, ty, tau.interp, False)

            case "abs":
                return self._translate_abs(tau, ctx, deriv)

            case "tabs":
                node = deriv.term
                inner_ctx = ctx.bind_type(node.param, RTop())
                body = self.translate(tau, inner_ctx, deriv.children[0])
                if body.wrapped:
                    raise InternalError(
                        "a type abstraction over a term with an existential "
                        "(cap-dependent) type has no encoding slot"
                    )
                term = TLam(node.param, TopShape(), body.term)
                ty = self.encode_type(tau, deriv.type)
                return TransOut(term, ty, tau.interp, False)

            case "cabs":
                node = deriv.term
                tau2 = tau.bind(node.param, cset(CaptVarCap(node.param)))
                inner_ctx = ctx.bind_capt(node.param, None)
                body = self.translate(tau2, inner_ctx, deriv.children[0])
                if body.wrapped:
                    raise InternalError(
                        "a capture abstraction over a term with an existential "
                        "(cap-dependent) type has no encoding slot"
                    )
                term = CLam(node.param, None, body.term)
                ty = self.encode_type(tau, deriv.type)
                return TransOut(term, ty, tau.interp, False)

            case "app":
                return self._translate_app(tau, ctx, deriv)

            case "tapp":
                fn = self.translate(tau, ctx, deriv.children[0])
                ch = Chain(self.supply)
                zx = ch.push("z", fn.term)
                arg_shape = self.encode_shape(tau, deriv.meta["type_arg"], {})
                term = ch.wrap(TApp(zx, arg_shape))
                ty = self.encode_type(tau, deriv.type)
                return TransOut(term, ty, tau.interp, False)

            case "capp":
                fn = self.translate(tau, ctx, deriv.children[0])
                ch = Chain(self.supply)
                zx = ch.push("z", fn.term)
                arg = self.encode_cset(tau, deriv.meta["capt_arg"])
                term = ch.wrap(CApp(zx, arg))
                ty = self.encode_type(tau, deriv.type)
                return TransOut(term, ty, tau.interp, False)

            case "let":
                return self._translate_let(tau, ctx, deriv)

        raise InternalError(f"translate: unhandled derivation rule {deriv.rule}")

    def _translate_abs(
        self, tau: TranslationContext, ctx: Context, deriv: Derivation
    ) -> TransOut:
        node = deriv.term  # RLam
        pt: ReacapType = node.param_type
        x = node.param
        c_x = self.supply.fresh(f"c{x.text}")
        c_xs = self.supply.fresh(f"c{x.text}s")
        param_shape, bound = self._encode_param(tau, c_xs, pt, {})
        tau_body = tau.bind(x, cset(CaptVarCap(c_x)), cset(CaptVarCap(c_xs)))
        inner_ctx = ctx.bind_term(x, pt)
        body = self.translate(tau_body, inner_ctx, deriv.children[0])

        # the encoded result: source result type under a fresh existential
        src_fun = deriv.type  # (forall^a (x: pt) U) ^ caps
        assert isinstance(src_fun.shape, RFun)
        result_t = self.wrap_result(tau_body, src_fun.shape.result)

        if isinstance(result_t, Existential):
            if body.wrapped:
                inner_body = body.term
            else:
                ch = Chain(self.supply)
                zr = ch.push("z", body.term)
                inner_body = ch.wrap(Pack(body.interp, zr, result_t))
        else:
            if body.wrapped:
                raise InternalError(
                    "function body translated to an existential but the encoded "
                    "result type has none"
                )
            inner_body = body.term

        term = CLam(
            c_x,
            bound,
            CLam(
                c_xs,
                None,
                Lam(x, CaplessType(param_shape, cset(CaptVarCap(c_x))), inner_body),
            ),
        )
        ty = self.encode_type(tau, deriv.type)
        return TransOut(term, ty, tau.interp, False)

    def _translate_app(
        self, tau: TranslationContext, ctx: Context, deriv: Derivation
    ) -> TransOut:
        fun_type: ReacapType = deriv.meta["fun_type"]
        arg_sub: SubDeriv = deriv.meta["arg_sub"]
        arg_dcs = deriv.meta["arg_dcs"]
        arg_type: ReacapType = deriv.meta["arg_type"]
        fn = self.translate(tau, ctx, deriv.children[0])
        arg = self.translate(tau, ctx, deriv.children[1])

        ch = Chain(self.supply)
        zx = ch.push("z", fn.term)
        adapted, _d_arg = self.adapt_subtype(tau, ctx, ch, arg.term, arg_sub, arg.interp)
        zy = adapted if isinstance(adapted, Var) else Var(ch.push("z", adapted))
        d1 = self.encode_cset(tau, arg_dcs)
        outer = self.encode_cset(tau, arg_type.captures)
        z1 = ch.push("z", CApp(zx, outer))
        z2 = ch.push("z", CApp(z1, d1))
        term = ch.wrap(App(z2, zy.name))
        ty = self.wrap_result(tau, deriv.type)
        return TransOut(term, ty, tau.interp, isinstance(ty, Existential))

    def _translate_let(
        self, tau: TranslationContext, ctx: Context, deriv: Derivation
    ) -> TransOut:
        node = deriv.term  # Let
        z = node.binder
        rhs = self.translate(tau, ctx, deriv.children[0])
        rhs_src_type: ReacapType = deriv.children[0].type
        inner_ctx = ctx.bind_term(z, rhs_src_type)

        if rhs.wrapped:
            c_z = self.supply.fresh(f"c{z.text}")
            tau2 = tau.bind(z, cset(TermCap(z)), cset(CaptVarCap(c_z)))
            body = self.translate(tau2, inner_ctx, deriv.children[1])
            build = lambda body_term: LetEx(c_z, z, rhs.term, body_term)
        else:
            tau2 = tau.bind(z, cset(TermCap(z)))
            body = self.translate(tau2, inner_ctx, deriv.children[1])
            build = lambda body_term: Let(z, rhs.term, body_term)

        ty = self.wrap_result(tau, deriv.type)
        if isinstance(ty, Existential):
            if body.wrapped:
                term = build(body.term)
            else:
                ch = Chain(self.supply)
                zr = ch.push("z", body.term)
                term = build(ch.wrap(Pack(body.interp, zr, ty)))
        else:
            if body.wrapped:
                raise InternalError(
                    "let body translated to an existential but the let's encoded "
                    "type has none"
                )
            term = build(body.term)
        return TransOut(term, ty, tau.interp, isinstance(ty, Existential))

    # ------------------------------------------------------------------
    # Subtype adaptation
    # ------------------------------------------------------------------

    def adapt_subtype(
        self,
        tau: TranslationContext,
        ctx: Context,
        ch: Chain,
        answer: Term,
        sd: SubDeriv,
        interp_in: CaptureSet,
    ) -> tuple[Term, CaptureSet]:
        """Transform a translated answer across a source subtyping step."""
        match sd.rule:
            case "refl":
                return answer, interp_in
            case "top":
                return answer, interp_in
            case "dealias-l" | "dealias-r":
                return self.adapt_subtype(tau, ctx, ch, answer, sd.children[0], interp_in)
            case "capt":
                left: ReacapType = sd.left
                right: ReacapType = sd.right
                a2, d2 = self.adapt_subtype(
                    tau, ctx, ch, answer, sd.children[0], interp_in
                )
                if CAP in right.captures and CAP not in left.captures:
                    d_out = self.encode_cset(tau.with_interp(d2), left.captures)
                else:
                    d_out = d2
                return a2, d_out
            case "boxed":
                inner_ch = Chain(self.supply)
                zb = inner_ch.push("z", answer)
                z0 = inner_ch.push("z", TApp(zb, TopShape()))
                z1 = inner_ch.push("z", TApp(z0, TopShape()))
                a0, d0 = self.adapt_subtype(
                    tau, ctx, inner_ch, Var(z1), sd.children[0], interp_in
                )
                x1 = self.supply.fresh("B")
                x2 = self.supply.fresh("B")
                term = TLam(x1, TopShape(), TLam(x2, TopShape(), inner_ch.wrap(a0)))
                return term, d0
            case "fun":
                return self._adapt_fun(tau, ctx, ch, answer, sd, interp_in)
            case "tfun":
                p = sd.meta["param"]
                inner_ch = Chain(self.supply)
                zf = inner_ch.push("z", answer)
                z0 = inner_ch.push("z", TApp(zf, TVar(p)))
                a0, d0 = self.adapt_subtype(
                    tau, ctx.bind_type(p, RTop()), inner_ch, Var(z0), sd.children[0], interp_in
                )
                return TLam(p, TopShape(), inner_ch.wrap(a0)), d0
            case "cfun":
                p = sd.meta["param"]
                tau2 = tau.bind(p, cset(CaptVarCap(p)))
                inner_ch = Chain(self.supply)
                zf = inner_ch.push("z", answer)
                z0 = inner_ch.push("z", CApp(zf, cset(CaptVarCap(p))))
                a0, d0 = self.adapt_subtype(
                    tau2, ctx.bind_capt(p, None), inner_ch, Var(z0), sd.children[0], interp_in
                )
                return CLam(p, None, inner_ch.wrap(a0)), d0
            case "applied":
                t1 = ReacapType(sd.left, cset())
                t2 = ReacapType(sd.right, cset())
                if not (self.checker.can_dealias(ctx, t1) and self.checker.can_dealias(ctx, t2)):
                    raise InternalError(
                        "cannot adapt across applied-type subtyping whose expansion "
                        "is blocked by cap"
                    )
                e1 = self.checker.dealias(ctx, t1)
                e2 = self.checker.dealias(ctx, t2)
                re_derived = self.checker.subtype(ctx, e1, e2)
                if re_derived is None:
                    raise InternalError(
                        "applied-type subtyping does not re-derive at the expansions"
                    )
                return self.adapt_subtype(tau, ctx, ch, answer, re_derived, interp_in)
        raise InternalError(f"adapt_subtype: unhandled rule {sd.rule}")

    def _adapt_fun(
        self,
        tau: TranslationContext,
        ctx: Context,
        ch: Chain,
        answer: Term,
        sd: SubDeriv,
        interp_in: CaptureSet,
    ) -> tuple[Term, CaptureSet]:
        left: RFun = sd.left
        right: RFun = sd.right
        dom_sub, cod_sub = sd.children
        z = sd.meta["param"]
        t2: ReacapType = sd.meta["binder_type"]

        c_z = self.supply.fresh(f"c{z.text}")
        c_zs = self.supply.fresh(f"c{z.text}s")
        param_shape, bound = self._encode_param(tau, c_zs, t2, {})
        tau2 = tau.bind(z, cset(CaptVarCap(c_z)), cset(CaptVarCap(c_zs)))
        inner_ctx = ctx.bind_term(z, t2)

        body_ch = Chain(self.supply)
        zf = body_ch.push("z", answer)
        a0, d0 = self.adapt_subtype(
            tau2, inner_ctx, body_ch, Var(z), dom_sub, cset(CaptVarCap(c_zs))
        )
        za = a0 if isinstance(a0, Var) else Var(body_ch.push("z", a0))
        z1 = body_ch.push("z", CApp(zf, cset(CaptVarCap(c_z))))
        z2 = body_ch.push("z", CApp(z1, d0))
        app = App(z2, za.name)

        r1 = self.wrap_result(tau2, left.result)
        r2 = self.wrap_result(tau2, right.result)
        if isinstance(r1, Existential):
            c3, z3 = body_ch.push_ex("c", "z", app)
            start = cset(CaptVarCap(c3))
        else:
            z3 = body_ch.push("z", app)
            start = tau2.interp
        a1, d1 = self.adapt_subtype(tau2, inner_ctx, body_ch, Var(z3), cod_sub, start)
        if isinstance(r2, Existential):
            zo = a1 if isinstance(a1, Var) else Var(body_ch.push("z", a1))
            final: Term = Pack(d1, zo.name, r2)
        else:
            final = a1
        body = body_ch.wrap(final)
        term = CLam(
            c_z,
            bound,
            CLam(c_zs, None, Lam(z, CaplessType(param_shape, cset(CaptVarCap(c_z))), body)),
        )
        return term, interp_in


# ---------------------------------------------------------------------------
# Public entry points
# ---------------------------------------------------------------------------


@dataclass
class TranslationReport:
    source_type: str
    source_use: str
    encoded_type: str
    output_type: str
    output_use: str
    verified: bool

    def to_json(self) -> dict:
        return {
            "sourceType": self.source_type,
            "sourceUse": self.source_use,
            "encodedType": self.encoded_type,
            "outputType": self.output_type,
            "outputUse": self.output_use,
            "verified": self.verified,
        }


def translate_program(
    defs: TypeDefContext,
    term: Term,
    supply: NameSupply,
    assumes: tuple = (),
) -> tuple[Term, CaplessExist, Derivation]:
    """Elaborate a closed (modulo typedefs) Reacap program into Capless.

    Returns the output term, the expected encoded type, and the source
    derivation.  Raises CheckError for improper inputs.
    """
    if assumes:
        raise err(
            E_TRANSLATE_UNSUPPORTED,
            "translation requires a program closed up to type definitions; "
            "assume declarations would need capture-variable assumptions in "
            "the target",
        )
    tau = empty_translation_context()
    reason = check_proper(tau, EMPTY_CONTEXT, EMPTY_CONTEXT)
    if reason is not None:
        raise err(E_NOT_PROPER, reason)
    result = synth_reacap(defs, EMPTY_CONTEXT, term, supply)
    tr = Translator(defs, supply)
    out = tr.translate(tau, EMPTY_CONTEXT, result.derivation)
    return out.term, out.ty, result.derivation


def verify_translation(
    defs: TypeDefContext, term: Term, supply: NameSupply
) -> tuple[Term, TranslationReport]:
    """Translate, re-check the output in Capless, and compare against the
    encoding of the source type (assignability under subsumption)."""
    from .frontend import print_cset, print_type

    src = synth_reacap(defs, EMPTY_CONTEXT, term, supply)
    out_term, expected, _deriv = translate_program(defs, term, supply)
    checker = CaplessChecker(supply)
    out_result = checker.synth(EMPTY_CONTEXT, out_term)
    ok = checker.subtype_exist(EMPTY_CONTEXT, out_result.type, expected)
    report = TranslationReport(
        source_type=print_type(src.type),
        source_use=print_cset(src.use),
        encoded_type=print_type(expected),
        output_type=print_type(out_result.type),
        output_use=print_cset(out_result.use),
        verified=ok,
    )
    if not ok:
        raise err(
            E_TRANSLATE_MISMATCH,
            "translated term does not check at the encoded source type",
            expected=report.encoded_type,
            actual=report.output_type,
        )
    return out_term, report
