"""Concrete syntax: lexer, MNF-enforcing parser, canonical printer.

File layout: `type` definitions, then `assume` declarations, then one term.
Extensions: `.cls` (Capless), `.rcp` (Reacap).  Comments run from `--` to
end of line.  Application and operation positions accept only identifiers;
anything else is a NonMNF parse error.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .diagnostics import E_NON_MNF, E_PARSE, CheckError, Diagnostic, err
from .syntax import (
    CAP,
    App,
    Boundary,
    BreakShape,
    CapCap,
    CaplessExist,
    CaplessShape,
    CaplessType,
    CaptFun,
    CaptureBound,
    CaptureSet,
    CaptVarCap,
    CApp,
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
    Scope,
    Span,
    TApp,
    TermCap,
    TermFun,
    TLam,
    TopShape,
    TVar,
    TypeFun,
    Term,
    Var,
    Variance,
    cset,
    is_answer,
)
from .wellformed import TypeDef, TypeDefContext

KEYWORDS = {
    "fun", "tfun", "cfun", "let", "in", "pack", "as", "box", "unbox",
    "boundary", "type", "assume", "exists", "forall", "Top", "Break",
    "Never", "cap",
}

PUNCT = ["<:", "=>", "(", ")", "[", "]", "{", "}", ",", ";", ":", "^", "*",
         "=", ".", "+", "-", "@use"]


@dataclass(frozen=True)
class Token:
    kind: str  # "ident", "kw", "punct", "eof"
    text: str
    span: Span


class Lexer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1

    def _advance(self, n: int) -> None:
        for ch in self.text[self.pos : self.pos + n]:
            if ch == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
        self.pos += n

    def tokens(self) -> list[Token]:
        out: list[Token] = []
        text = self.text
        while self.pos < len(text):
            ch = text[self.pos]
            if ch in " \t\r\n":
                self._advance(1)
                continue
            if text.startswith("--", self.pos):
                end = text.find("\n", self.pos)
                self._advance((end if end != -1 else len(text)) - self.pos)
                continue
            start = (self.line, self.col)
            if ch.isalpha() or ch == "_":
                begin = self.pos
                end = begin
                while end < len(text) and (text[end].isalnum() or text[end] == "_"):
                    end += 1
                word = text[begin:end]
                # printer disambiguator suffix: ident@123
                if end < len(text) and text[end] == "@":
                    j = end + 1
                    while j < len(text) and text[j].isdigit():
                        j += 1
                    if j > end + 1:
                        end = j
                tok_text = text[begin:end]
                self._advance(end - begin)
                kind = "kw" if tok_text in KEYWORDS else "ident"
                out.append(Token(kind, tok_text, self._span(start)))
                continue
            matched = False
            for p in PUNCT:
                if text.startswith(p, self.pos):
                    self._advance(len(p))
                    out.append(Token("punct", p, self._span(start)))
                    matched = True
                    break
            if not matched:
                raise err(
                    E_PARSE,
                    f"unexpected character {ch!r}",
                    span=Span(start[0], start[1], start[0], start[1] + 1),
                )
        out.append(Token("eof", "", Span(self.line, self.col, self.line, self.col)))
        return out

    def _span(self, start: tuple[int, int]) -> Span:
        return Span(start[0], start[1], self.line, self.col)


def _lex(text: str) -> list[Token]:
    return Lexer(text).tokens()


@dataclass
class SourceFile:
    dialect: str  # "capless" | "reacap"
    typedefs: TypeDefContext
    assumes: tuple[tuple[Name, object], ...]  # (name, declared type)
    term: Term
    supply: NameSupply


class Parser:
    def __init__(self, tokens: list[Token], dialect: str):
        self.toks = tokens
        self.i = 0
        self.dialect = dialect
        self.supply = NameSupply()
        self.env: dict[str, tuple[str, Name]] = {}
        self.typedefs: dict[str, TypeDef] = {}
        self.typedef_order: list[TypeDef] = []

    # --- token helpers -----------------------------------------------------

    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        t = self.peek()
        return t.text == text and t.kind in ("punct", "kw")

    def take(self) -> Token:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def expect(self, text: str) -> Token:
        t = self.peek()
        if t.text != text or t.kind == "ident":
            raise err(E_PARSE, f"expected {text!r}, found {t.text or 'end of input'!r}", span=t.span)
        return self.take()

    def expect_ident(self) -> Token:
        t = self.peek()
        if t.kind != "ident":
            raise err(E_PARSE, f"expected an identifier, found {t.text or 'end of input'!r}", span=t.span)
        return self.take()

    def fail(self, msg: str, code: str = E_PARSE) -> CheckError:
        return err(code, msg, span=self.peek().span)

    # --- scoping -----------------------------------------------------------

    @staticmethod
    def _base(text: str) -> str:
        return text.split("@", 1)[0]

    def bind(self, kind: str, tok: Token) -> tuple[Name, Optional[tuple[str, tuple[str, Name]]]]:
        base = self._base(tok.text)
        name = self.supply.fresh(base)
        old = (base, self.env[base]) if base in self.env else None
        self.env[base] = (kind, name)
        return name, old

    def unbind(self, tok_text: str, old) -> None:
        base = self._base(tok_text)
        if old is not None:
            self.env[old[0]] = old[1]
        else:
            self.env.pop(base, None)

    def resolve(self, tok: Token, kinds: tuple[str, ...]) -> tuple[str, Name]:
        base = self._base(tok.text)
        hit = self.env.get(base)
        if hit is None or hit[0] not in kinds:
            raise err(E_PARSE, f"unbound {' or '.join(kinds)} name {base!r}", span=tok.span)
        return hit

    # --- file --------------------------------------------------------------

    def parse_file(self) -> SourceFile:
        typedefs: list[TypeDef] = []
        while self.at("type"):
            if self.dialect != "reacap":
                raise self.fail("type definitions are a Reacap construct")
            typedefs.append(self.parse_typedef())
        assumes: list[tuple[Name, object]] = []
        while self.at("assume"):
            assumes.append(self.parse_assume())
        term = self.parse_term()
        t = self.peek()
        if t.kind != "eof":
            raise err(E_PARSE, f"trailing input after the program term: {t.text!r}", span=t.span)
        return SourceFile(
            self.dialect,
            TypeDefContext(tuple(self.typedef_order)),
            tuple(assumes),
            term,
            self.supply,
        )

    def parse_typedef(self) -> TypeDef:
        self.expect("type")
        name_tok = self.expect_ident()
        if name_tok.text in self.typedefs:
            raise err(E_PARSE, f"duplicate type definition {name_tok.text!r}", span=name_tok.span)
        self.expect("[")
        params: list[tuple[Name, Variance]] = []
        saved = []
        while not self.at("]"):
            if params:
                self.expect(",")
            if self.at("+"):
                self.take()
                v = Variance(True)
            elif self.at("-"):
                self.take()
                v = Variance(False)
            else:
                raise self.fail("type definition parameters need a variance (+ or -)")
            ptok = self.expect_ident()
            pname, old = self.bind("type", ptok)
            saved.append((ptok.text, old))
            params.append((pname, v))
        self.expect("]")
        self.expect("=")
        body = self.parse_type()
        self.expect(";")
        for text, old in reversed(saved):
            self.unbind(text, old)
        d = TypeDef(name_tok.text, tuple(params), body)
        self.typedefs[d.name] = d
        self.typedef_order.append(d)
        return d

    def parse_assume(self) -> tuple[Name, object]:
        self.expect("assume")
        tok = self.expect_ident()
        self.expect(":")
        ty = self.parse_type()
        if self.at(";"):
            self.take()
        name, _old = self.bind("term", tok)
        return (name, ty)

    # --- terms -------------------------------------------------------------

    def parse_term(self) -> Term:
        t = self.peek()
        if t.text == "fun" and t.kind == "kw":
            return self.parse_fun()
        if t.text == "tfun" and t.kind == "kw":
            return self.parse_tfun()
        if t.text == "cfun" and t.kind == "kw":
            return self.parse_cfun()
        if t.text == "let" and t.kind == "kw":
            return self.parse_let()
        if t.text == "pack" and t.kind == "kw":
            return self.parse_pack()
        if t.text == "box" and t.kind == "kw":
            return self.parse_box()
        if t.text == "unbox" and t.kind == "kw":
            return self.parse_unbox()
        if t.text == "boundary" and t.kind == "kw":
            return self.parse_boundary()
        return self.parse_application()

    def parse_fun(self) -> Term:
        start = self.expect("fun")
        use = False
        if self.at("@use"):
            if self.dialect != "reacap":
                raise self.fail("@use annotations are a Reacap construct")
            self.take()
            use = True
        self.expect("(")
        ptok = self.expect_ident()
        self.expect(":")
        pt = self.parse_type()
        self.expect(")")
        self.expect("=>")
        pname, old = self.bind("term", ptok)
        body = self.parse_term()
        self.unbind(ptok.text, old)
        if self.dialect == "capless":
            return Lam(pname, pt, body, span=start.span)
        return RLam(use, pname, pt, body, span=start.span)

    def parse_tfun(self) -> Term:
        start = self.expect("tfun")
        self.expect("[")
        ptok = self.expect_ident()
        self.expect("<:")
        bound = self.parse_shape()  # bounds are scoped outside the binder
        self.expect("]")
        self.expect("=>")
        pname, old = self.bind("type", ptok)
        body = self.parse_term()
        self.unbind(ptok.text, old)
        if self.dialect == "reacap":
            if not isinstance(bound, RTop):
                raise err(E_PARSE, "Reacap type parameters must be bounded by Top", span=start.span)
            return RTLam(pname, body, span=start.span)
        return TLam(pname, bound, body, span=start.span)

    def parse_cfun(self) -> Term:
        start = self.expect("cfun")
        self.expect("[")
        ptok = self.expect_ident()
        bound: CaptureBound = None
        if self.at("<:"):
            self.take()
            bound = self.parse_bound()
            if self.dialect == "reacap" and bound is not None:
                raise err(E_PARSE, "Reacap capture parameters are unbounded", span=start.span)
        self.expect("]")
        self.expect("=>")
        pname, old = self.bind("capt", ptok)
        body = self.parse_term()
        self.unbind(ptok.text, old)
        if self.dialect == "reacap":
            return RCLam(pname, body, span=start.span)
        return CLam(pname, bound, body, span=start.span)

    def parse_let(self) -> Term:
        start = self.expect("let")
        if self.at("["):
            if self.dialect != "capless":
                raise self.fail("existential let is a Capless construct")
            self.take()
            ctok = self.expect_ident()
            self.expect(",")
            xtok = self.expect_ident()
            self.expect("]")
            self.expect("=")
            rhs = self.parse_term()
            self.expect("in")
            cname, cold = self.bind("capt", ctok)
            xname, xold = self.bind("term", xtok)
            body = self.parse_term()
            self.unbind(xtok.text, xold)
            self.unbind(ctok.text, cold)
            return LetEx(cname, xname, rhs, body, span=start.span)
        xtok = self.expect_ident()
        self.expect("=")
        rhs = self.parse_term()
        self.expect("in")
        xname, old = self.bind("term", xtok)
        body = self.parse_term()
        self.unbind(xtok.text, old)
        return Let(xname, rhs, body, span=start.span)

    def parse_pack(self) -> Term:
        start = self.expect("pack")
        if self.dialect != "capless":
            raise self.fail("pack is a Capless construct")
        self.expect("{")
        witness = self.parse_cset()
        self.expect("}")
        payload = self.expect_ident()
        _, pname = self.resolve(payload, ("term",))
        annot: Optional[Existential] = None
        if self.at("as"):
            self.take()
            ann = self.parse_exist_type()
            if not isinstance(ann, Existential):
                raise err(E_PARSE, "pack ascriptions must be existential types", span=start.span)
            annot = ann
        return Pack(witness, pname, annot, span=start.span)

    def parse_box(self) -> Term:
        start = self.expect("box")
        if self.dialect != "reacap":
            raise self.fail("box terms are a Reacap construct")
        tok = self.expect_ident()
        _, name = self.resolve(tok, ("term",))
        return RBox(name, span=start.span)

    def parse_unbox(self) -> Term:
        start = self.expect("unbox")
        if self.dialect != "reacap":
            raise self.fail("unbox is a Reacap construct")
        self.expect("{")
        caps = self.parse_cset()
        self.expect("}")
        tok = self.expect_ident()
        _, name = self.resolve(tok, ("term",))
        return RUnbox(caps, name, span=start.span)

    def parse_boundary(self) -> Term:
        start = self.expect("boundary")
        if self.dialect != "capless":
            raise self.fail("boundary is a Capless construct")
        self.expect("[")
        shape = self.parse_shape()
        self.expect("]")
        self.expect("as")
        self.expect("[")
        ctok = self.expect_ident()
        self.expect(",")
        xtok = self.expect_ident()
        self.expect("]")
        self.expect("in")
        cname, cold = self.bind("capt", ctok)
        xname, xold = self.bind("term", xtok)
        body = self.parse_term()
        self.unbind(xtok.text, xold)
        self.unbind(ctok.text, cold)
        return Boundary(shape, cname, xname, body, span=start.span)

    def parse_application(self) -> Term:
        head_tok = self.peek()
        head = self.parse_operand()
        while True:
            t = self.peek()
            if t.kind == "ident" or (t.text == "(" and t.kind == "punct"):
                if not isinstance(head, Var):
                    raise err(
                        E_NON_MNF,
                        "operator position holds a compound term; let-bind it first",
                        span=t.span,
                    )
                arg = self.parse_operand()
                if not isinstance(arg, Var):
                    raise err(
                        E_NON_MNF,
                        "operand is a compound term; let-bind it first",
                        span=t.span,
                    )
                head = App(head.name, arg.name, span=head_tok.span)
            elif t.text == "[" and t.kind == "punct":
                if not isinstance(head, Var):
                    raise err(
                        E_NON_MNF,
                        "operator position holds a compound term; let-bind it first",
                        span=t.span,
                    )
                self.take()
                if self.at("{"):
                    self.take()
                    caps = self.parse_cset()
                    self.expect("}")
                    self.expect("]")
                    head = CApp(head.name, caps, span=head_tok.span)
                else:
                    shape = self.parse_shape()
                    self.expect("]")
                    head = TApp(head.name, shape, span=head_tok.span)
            else:
                return head

    def parse_operand(self) -> Term:
        t = self.peek()
        if t.kind == "ident":
            self.take()
            _, name = self.resolve(t, ("term",))
            return Var(name, span=t.span)
        if t.text == "(" and t.kind == "punct":
            self.take()
            inner = self.parse_term()
            self.expect(")")
            return inner
        raise err(E_PARSE, f"expected a term, found {t.text or 'end of input'!r}", span=t.span)

    # --- capture sets and bounds -------------------------------------------

    def parse_cset(self) -> CaptureSet:
        atoms = []
        while not self.at("}"):
            if atoms:
                self.expect(",")
            t = self.peek()
            if t.text == "cap" and t.kind == "kw":
                if self.dialect != "reacap":
                    raise err(E_PARSE, "cap is a Reacap capture", span=t.span)
                self.take()
                atoms.append(CAP)
                continue
            tok = self.expect_ident()
            kind, name = self.resolve(tok, ("term", "capt"))
            if self.at("*"):
                self.take()
                if self.dialect != "reacap":
                    raise err(E_PARSE, "reach captures are a Reacap construct", span=tok.span)
                if kind != "term":
                    raise err(E_PARSE, "reach applies only to term variables", span=tok.span)
                atoms.append(ReachCap(name))
            elif kind == "term":
                atoms.append(TermCap(name))
            else:
                atoms.append(CaptVarCap(name))
        return cset(*atoms)

    def parse_bound(self) -> CaptureBound:
        if self.at("*"):
            self.take()
            return None
        self.expect("{")
        c = self.parse_cset()
        self.expect("}")
        return c

    # --- types ---------------------------------------------------------------

    def parse_exist_type(self) -> CaplessExist:
        if self.at("exists"):
            start = self.take()
            if self.dialect != "capless":
                raise err(E_PARSE, "existential types are a Capless construct", span=start.span)
            ctok = self.expect_ident()
            self.expect(".")
            cname, old = self.bind("capt", ctok)
            body = self.parse_type()
            self.unbind(ctok.text, old)
            return Existential(cname, body)
        return self.parse_type()

    def parse_type(self):
        left = self.parse_type_postfix()
        if self.at("=>"):
            self.take()
            right = self.parse_type()
            z = self.supply.fresh("z")
            if self.dialect == "capless":
                return CaplessType(TermFun(z, left, right), cset())
            return ReacapType(RFun(False, z, left, right), cset())
        return left

    def parse_type_postfix(self):
        base = self.parse_type_prefix()
        if self.at("^"):
            self.take()
            self.expect("{")
            caps = self.parse_cset()
            self.expect("}")
            if self.dialect == "capless":
                assert isinstance(base, CaplessType)
                if not base.captures.is_empty:
                    raise self.fail("a type cannot carry two capture sets")
                return CaplessType(base.shape, caps)
            assert isinstance(base, ReacapType)
            if not base.captures.is_empty:
                raise self.fail("a type cannot carry two capture sets")
            return ReacapType(base.shape, caps)
        return base

    def parse_type_prefix(self):
        t = self.peek()
        if t.text == "box" and t.kind == "kw":
            if self.dialect != "reacap":
                raise err(E_PARSE, "box types are a Reacap construct", span=t.span)
            self.take()
            inner = self.parse_type_postfix()
            return ReacapType(RBoxed(inner), cset())
        if t.text == "forall" and t.kind == "kw":
            return self.parse_forall()
        return self.parse_type_atom()

    def parse_forall(self):
        start = self.expect("forall")
        use = False
        if self.at("@use"):
            if self.dialect != "reacap":
                raise err(E_PARSE, "@use annotations are a Reacap construct", span=start.span)
            self.take()
            use = True
        if self.at("("):
            self.take()
            ptok = self.expect_ident()
            self.expect(":")
            pt = self.parse_type()
            self.expect(")")
            pname, old = self.bind("term", ptok)
            res = self.parse_exist_type() if self.dialect == "capless" else self.parse_type()
            self.unbind(ptok.text, old)
            if self.dialect == "capless":
                return CaplessType(TermFun(pname, pt, res), cset())
            return ReacapType(RFun(use, pname, pt, res), cset())
        if use:
            raise err(E_PARSE, "@use applies only to term-function parameters", span=start.span)
        self.expect("[")
        ptok = self.expect_ident()
        if self.at("<:"):
            self.take()
            if self.at("{") or self.at("*"):
                bound = self.parse_bound()
                if self.dialect == "reacap" and bound is not None:
                    raise err(E_PARSE, "Reacap capture parameters are unbounded", span=start.span)
                return self._finish_captfun(ptok, bound, start)
            shape = self.parse_shape()
            self.expect("]")
            pname, old = self.bind("type", ptok)
            res = self.parse_exist_type() if self.dialect == "capless" else self.parse_type()
            self.unbind(ptok.text, old)
            if self.dialect == "reacap":
                if not isinstance(shape, RTop):
                    raise err(E_PARSE, "Reacap type parameters must be bounded by Top", span=start.span)
                return ReacapType(RTypeFun(pname, res), cset())
            return CaplessType(TypeFun(pname, shape, res), cset())
        return self._finish_captfun(ptok, None, start)

    def _finish_captfun(self, ptok: Token, bound: CaptureBound, start: Token):
        self.expect("]")
        pname, old = self.bind("capt", ptok)
        res = self.parse_exist_type() if self.dialect == "capless" else self.parse_type()
        self.unbind(ptok.text, old)
        if self.dialect == "reacap":
            return ReacapType(RCaptFun(pname, res), cset())
        return CaplessType(CaptFun(pname, bound, res), cset())

    def parse_type_atom(self):
        t = self.peek()
        if t.text == "Top" and t.kind == "kw":
            self.take()
            return (
                CaplessType(TopShape(), cset())
                if self.dialect == "capless"
                else ReacapType(RTop(), cset())
            )
        if t.text == "Never" and t.kind == "kw":
            if self.dialect != "capless":
                raise err(E_PARSE, "Never is a Capless shape", span=t.span)
            self.take()
            return CaplessType(NeverShape(), cset())
        if t.text == "Break" and t.kind == "kw":
            if self.dialect != "capless":
                raise err(E_PARSE, "Break is a Capless shape", span=t.span)
            self.take()
            self.expect("[")
            shape = self.parse_shape()
            self.expect("]")
            return CaplessType(BreakShape(shape), cset())
        if t.text == "(" and t.kind == "punct":
            self.take()
            inner = self.parse_exist_type() if self.dialect == "capless" else self.parse_type()
            self.expect(")")
            return inner
        if t.kind == "ident":
            self.take()
            base = self._base(t.text)
            if base in self.typedefs:
                d = self.typedefs[base]
                self.expect("[")
                args: list[ReacapType] = []
                while not self.at("]"):
                    if args:
                        self.expect(",")
                    args.append(self.parse_type())
                self.expect("]")
                if len(args) != d.arity:
                    raise err(
                        E_PARSE,
                        f"{base} expects {d.arity} type argument(s), got {len(args)}",
                        span=t.span,
                    )
                return ReacapType(RApplied(base, tuple(args)), cset())
            kind, name = self.resolve(t, ("type",))
            if self.dialect == "capless":
                return CaplessType(TVar(name), cset())
            return ReacapType(RTVar(name), cset())
        raise err(E_PARSE, f"expected a type, found {t.text or 'end of input'!r}", span=t.span)

    def parse_shape(self):
        ty = self.parse_type_postfix()
        if self.dialect == "capless":
            if isinstance(ty, Existential) or not ty.captures.is_empty:
                raise self.fail("a shape is required here (no capture set)")
            return ty.shape
        if not ty.captures.is_empty:
            raise self.fail("a shape is required here (no capture set)")
        return ty.shape


def dialect_for_path(path: str) -> Optional[str]:
    if path.endswith(".cls"):
        return "capless"
    if path.endswith(".rcp"):
        return "reacap"
    return None


def parse(text: str, dialect: str) -> SourceFile:
    """Parse a source file; raises CheckError with E-PARSE / E-NON-MNF."""
    if dialect not in ("capless", "reacap"):
        raise ValueError(f"unknown dialect {dialect!r}")
    return Parser(_lex(text), dialect).parse_file()


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------


class Printer:
    """Canonical printer: minimal parentheses, capture sets in canonical
    order, name hints disambiguated as `x@1`, `x@2` on collision."""

    def __init__(self):
        self.order: list[Name] = []
        self.seen: set[int] = set()
        self.display: dict[int, str] = {}

    def _note(self, n: Name) -> None:
        if n.serial not in self.seen:
            self.seen.add(n.serial)
            self.order.append(n)

    def _collect(self, node: object) -> None:
        match node:
            case None | TopShape() | RTop() | NeverShape() | CapCap():
                return
            case Name():
                self._note(node)
            case CaptureSet():
                for a in node:
                    if not isinstance(a, CapCap):
                        self._note(a.name)
            case TVar(n) | RTVar(n) | Var(n) | RBox(n):
                self._note(n)
            case TermFun(p, pt, res) | RFun(_, p, pt, res):
                self._collect(pt)
                self._note(p)
                self._collect(res)
            case TypeFun(p, b, res):
                self._collect(b)
                self._note(p)
                self._collect(res)
            case CaptFun(p, b, res):
                self._collect(b)
                self._note(p)
                self._collect(res)
            case RTypeFun(p, res) | RCaptFun(p, res):
                self._note(p)
                self._collect(res)
            case BreakShape(s):
                self._collect(s)
            case RBoxed(i):
                self._collect(i)
            case RApplied(_, args):
                for a in args:
                    self._collect(a)
            case CaplessType(s, c) | ReacapType(s, c):
                self._collect(s)
                self._collect(c)
            case Existential(b, body):
                self._note(b)
                self._collect(body)
            case App(f, a):
                self._note(f)
                self._note(a)
            case TApp(f, a):
                self._note(f)
                self._collect(a)
            case CApp(f, a):
                self._note(f)
                self._collect(a)
            case Let(x, rhs, body):
                self._collect(rhs)
                self._note(x)
                self._collect(body)
            case Lam(p, pt, body) | RLam(_, p, pt, body):
                self._collect(pt)
                self._note(p)
                self._collect(body)
            case TLam(p, b, body):
                self._collect(b)
                self._note(p)
                self._collect(body)
            case CLam(p, b, body):
                self._collect(b)
                self._note(p)
                self._collect(body)
            case RTLam(p, body) | RCLam(p, body):
                self._note(p)
                self._collect(body)
            case Pack(w, p, a):
                self._collect(w)
                self._note(p)
                self._collect(a)
            case LetEx(c, x, rhs, body):
                self._collect(rhs)
                self._note(c)
                self._note(x)
                self._collect(body)
            case Boundary(s, c, x, body):
                self._collect(s)
                self._note(c)
                self._note(x)
                self._collect(body)
            case Scope(l, body):
                self._note(l)
                self._collect(body)
            case RUnbox(c, t):
                self._collect(c)
                self._note(t)
            case _:
                raise TypeError(f"printer: unhandled node {node!r}")

    def _assign(self) -> None:
        by_text: dict[str, list[Name]] = {}
        for n in self.order:
            by_text.setdefault(n.text, []).append(n)
        for text, names in by_text.items():
            if len(names) == 1:
                self.display[names[0].serial] = text
            else:
                for k, n in enumerate(names, start=1):
                    self.display[n.serial] = f"{text}@{k}"

    def name(self, n: Name) -> str:
        return self.display.get(n.serial, n.text)

    # -- capture sets --

    def cset(self, c: CaptureSet) -> str:
        parts = []
        for a in c:
            match a:
                case TermCap(n) | CaptVarCap(n):
                    parts.append(self.name(n))
                case ReachCap(n):
                    parts.append(self.name(n) + "*")
                case CapCap():
                    parts.append("cap")
        return "{" + ", ".join(parts) + "}"

    def bound(self, b: CaptureBound) -> str:
        return "*" if b is None else self.cset(b)

    # -- types --

    def type_atom(self, t: object) -> str:
        """Render at atom precedence (parenthesize unless already atomic)."""
        s = self.type(t)
        if self._is_atomic(t):
            return s
        return f"({s})"

    @staticmethod
    def _is_atomic(t: object) -> bool:
        match t:
            case CaplessType(shape, caps) | ReacapType(shape, caps):
                if not caps.is_empty:
                    return False
                return isinstance(shape, (TopShape, TVar, NeverShape, BreakShape, RTop, RTVar, RApplied))
            case _:
                return False

    def shape(self, s: object) -> str:
        match s:
            case TopShape() | RTop():
                return "Top"
            case NeverShape():
                return "Never"
            case TVar(n) | RTVar(n):
                return self.name(n)
            case BreakShape(inner):
                return f"Break [{self.shape(inner)}]"
            case TermFun(p, pt, res):
                return f"forall ({self.name(p)}: {self.type(pt)}) {self.type(res)}"
            case TypeFun(p, b, res):
                return f"forall [{self.name(p)} <: {self.shape(b)}] {self.type(res)}"
            case CaptFun(p, b, res):
                head = self.name(p) if b is None else f"{self.name(p)} <: {self.bound(b)}"
                return f"forall [{head}] {self.type(res)}"
            case RFun(use, p, pt, res):
                ann = "@use " if use else ""
                return f"forall {ann}({self.name(p)}: {self.type(pt)}) {self.type(res)}"
            case RTypeFun(p, res):
                return f"forall [{self.name(p)} <: Top] {self.type(res)}"
            case RCaptFun(p, res):
                return f"forall [{self.name(p)}] {self.type(res)}"
            case RBoxed(inner):
                return f"box {self.type_box_operand(inner)}"
            case RApplied(head, args):
                return f"{head}[{', '.join(self.type(a) for a in args)}]"
        raise TypeError(f"printer: unhandled shape {s!r}")

    def type_box_operand(self, t: object) -> str:
        # ^ binds tighter than box, so a capturing operand may stay bare:
        # its shape part was already parenthesized by `type` when needed.
        match t:
            case ReacapType(shape, caps):
                if not caps.is_empty:
                    return self.type(t)
                if self._is_atomic(t) or isinstance(shape, RBoxed):
                    return self.type(t)
        return f"({self.type(t)})"

    def type(self, t: object) -> str:
        match t:
            case Existential(b, body):
                return f"exists {self.name(b)}. {self.type(body)}"
            case CaplessType(shape, caps) | ReacapType(shape, caps):
                if caps.is_empty:
                    return self.shape(shape)
                base = self.shape(shape)
                if not isinstance(
                    shape, (TopShape, TVar, NeverShape, BreakShape, RTop, RTVar, RApplied)
                ):
                    base = f"({base})"
                return f"{base} ^ {self.cset(caps)}"
            case _:
                # bare shapes occur in tapp arguments and boundary headers
                return self.shape(t)

    # -- terms --

    def term(self, t: Term) -> str:
        match t:
            case Var(n):
                return self.name(n)
            case App(f, a):
                return f"{self.name(f)} {self.name(a)}"
            case TApp(f, s):
                return f"{self.name(f)} [{self.shape(s)}]"
            case CApp(f, c):
                return f"{self.name(f)} [{self.cset(c)}]"
            case Let(x, rhs, body):
                return f"let {self.name(x)} = {self.term(rhs)} in {self.term(body)}"
            case Lam(p, pt, body):
                return f"fun ({self.name(p)}: {self.type(pt)}) => {self.term(body)}"
            case RLam(use, p, pt, body):
                ann = "@use " if use else ""
                return f"fun {ann}({self.name(p)}: {self.type(pt)}) => {self.term(body)}"
            case TLam(p, b, body):
                return f"tfun [{self.name(p)} <: {self.shape(b)}] => {self.term(body)}"
            case RTLam(p, body):
                return f"tfun [{self.name(p)} <: Top] => {self.term(body)}"
            case CLam(p, b, body):
                head = self.name(p) if b is None else f"{self.name(p)} <: {self.bound(b)}"
                return f"cfun [{head}] => {self.term(body)}"
            case RCLam(p, body):
                return f"cfun [{self.name(p)}] => {self.term(body)}"
            case Pack(w, p, annot):
                base = f"pack {self.cset(w)} {self.name(p)}"
                if annot is not None:
                    base += f" as {self.type(annot)}"
                return base
            case LetEx(c, x, rhs, body):
                return (
                    f"let [{self.name(c)}, {self.name(x)}] = {self.term(rhs)} "
                    f"in {self.term(body)}"
                )
            case Boundary(s, c, x, body):
                return (
                    f"boundary [{self.shape(s)}] as [{self.name(c)}, {self.name(x)}] "
                    f"in {self.term(body)}"
                )
            case Scope(l, body):
                return f"scope {self.name(l)} in {self.term(body)}"
            case RBox(target):
                return f"box {self.name(target)}"
            case RUnbox(c, target):
                return f"unbox {self.cset(c)} {self.name(target)}"
        raise TypeError(f"printer: unhandled term {t!r}")


def _fresh_printer(*nodes: object) -> Printer:
    p = Printer()
    for n in nodes:
        if n is not None:
            p._collect(n)
    p._assign()
    return p


def print_term(t: Term) -> str:
    return _fresh_printer(t).term(t)


def print_type(t: object) -> str:
    return _fresh_printer(t).type(t)


def print_cset(c: CaptureSet) -> str:
    return _fresh_printer(c).cset(c)


def print_file(f: SourceFile) -> str:
    p = Printer()
    for d in f.typedefs:
        for n, _v in d.params:
            p._note(n)
        p._collect(d.body)
    for name, ty in f.assumes:
        p._note(name)
        p._collect(ty)
    p._collect(f.term)
    p._assign()
    lines = []
    for d in f.typedefs:
        params = ", ".join(f"{v}{p.name(n)}" for n, v in d.params)
        lines.append(f"type {d.name}[{params}] = {p.type(d.body)};")
    for name, ty in f.assumes:
        lines.append(f"assume {p.name(name)} : {p.type(ty)}")
    lines.append(p.term(f.term))
    return "\n".join(lines) + "\n"


def source_alpha_eq(a: SourceFile, b: SourceFile) -> bool:
    """Alpha-equivalence of whole files, treating assumes as binders."""
    from .syntax import alpha_eq

    if a.dialect != b.dialect or len(a.assumes) != len(b.assumes):
        return False
    defs_a, defs_b = list(a.typedefs), list(b.typedefs)
    if len(defs_a) != len(defs_b):
        return False
    env: dict[Name, Name] = {}
    for da, db in zip(defs_a, defs_b):
        if da.name != db.name or len(da.params) != len(db.params):
            return False
        penv = dict(env)
        for (na, va), (nb, vb) in zip(da.params, db.params):
            if va != vb:
                return False
            penv[na] = nb
        if not alpha_eq(da.body, db.body, penv):
            return False
    for (na, ta), (nb, tb) in zip(a.assumes, b.assumes):
        if not alpha_eq(ta, tb, dict(env)):
            return False
        env[na] = nb
    return alpha_eq(a.term, b.term, env)
