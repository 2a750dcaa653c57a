"""Small-step evaluator for Capless with a store and scoped capabilities.

The machine keeps the evaluation context as an explicit frame stack so that
breakout can unwind to its matching scope in one step.  Store entries are
append-only and never overwritten; binders are freshened on lift when a
name would collide (re-entered lets).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from .capless_check import TypingResult, synth_capless, synth_scoped, subtype_capless
from .diagnostics import CheckError, err, E_ILL_TYPED_STORE
from .frontend import print_term, print_type
from .syntax import (
    App,
    Boundary,
    CApp,
    CaplessExist,
    CLam,
    Existential,
    Label,
    Lam,
    Let,
    LetEx,
    Name,
    NameSupply,
    Pack,
    Scope,
    TApp,
    TLam,
    Term,
    Var,
    cset,
    TermCap,
    is_answer,
    is_value,
    subst_capt_var,
    subst_term_var,
    subst_type_var,
)
from .wellformed import Context, EMPTY_CONTEXT


@dataclass(frozen=True)
class LetFrame:
    binder: Name
    body: Term


@dataclass(frozen=True)
class LetExFrame:
    capt_binder: Name
    binder: Name
    body: Term


@dataclass(frozen=True)
class ScopeFrame:
    label: Label


Frame = Union[LetFrame, LetExFrame, ScopeFrame]


@dataclass
class MachineState:
    store: dict[Name, Term]  # insertion-ordered val bindings
    frames: list[Frame]  # innermost last
    control: Term

    def focus(self) -> Term:
        """Plug the control back into the frame stack."""
        t = self.control
        for f in reversed(self.frames):
            match f:
                case LetFrame(x, body):
                    t = Let(x, t, body)
                case LetExFrame(c, x, body):
                    t = LetEx(c, x, t, body)
                case ScopeFrame(label):
                    t = Scope(label, t)
        return t


def initial_state(t: Term) -> MachineState:
    return MachineState({}, [], t)


@dataclass(frozen=True)
class Stepped:
    state: MachineState
    rule: str
    redex: str


@dataclass(frozen=True)
class AtAnswer:
    pass


@dataclass(frozen=True)
class Stuck:
    reason: str  # "unbound-store" | "non-function" | "letex-non-pack" | "scope-extrusion"
    message: str


StepOutcome = Union[Stepped, AtAnswer, Stuck]


def _decompose(state: MachineState) -> None:
    while True:
        match state.control:
            case Let(x, rhs, body) if not is_answer(rhs):
                state.frames.append(LetFrame(x, body))
                state.control = rhs
            case LetEx(c, x, rhs, body) if not is_answer(rhs):
                state.frames.append(LetExFrame(c, x, body))
                state.control = rhs
            case Let(x, rhs, body):
                state.frames.append(LetFrame(x, body))
                state.control = rhs
            case LetEx(c, x, rhs, body):
                state.frames.append(LetExFrame(c, x, body))
                state.control = rhs
            case Scope(label, body):
                state.frames.append(ScopeFrame(label))
                state.control = body
            case _:
                return


def step(state: MachineState, supply: NameSupply) -> StepOutcome:
    """Apply exactly one reduction rule; decomposition is not a step."""
    _decompose(state)
    t = state.control
    store = state.store

    if is_answer(t):
        if not state.frames:
            return AtAnswer()
        frame = state.frames[-1]
        match frame:
            case ScopeFrame(label):
                redex = print_term(Scope(label, t))
                state.frames.pop()
                return Stepped(state, "leave", redex)
            case LetFrame(x, body):
                if isinstance(t, Var):
                    redex = print_term(Let(x, t, body))
                    state.frames.pop()
                    state.control = subst_term_var(body, x, t.name, supply)
                    return Stepped(state, "rename", redex)
                redex = print_term(Let(x, t, body))
                state.frames.pop()
                binder = x
                if binder in store:
                    fresh = supply.fresh(binder.text)
                    body = subst_term_var(body, binder, fresh, supply)
                    binder = fresh
                store[binder] = t
                state.control = body
                return Stepped(state, "lift", redex)
            case LetExFrame(c, x, body):
                if isinstance(t, Pack):
                    redex = print_term(LetEx(c, x, t, body))
                    state.frames.pop()
                    body = subst_capt_var(body, c, t.witness, supply)
                    body = subst_term_var(body, x, t.payload, supply)
                    state.control = body
                    return Stepped(state, "rename-e", redex)
                return Stuck(
                    "letex-non-pack",
                    "existential let received a non-pack answer: " + print_term(t),
                )

    match t:
        case Boundary(shape, c, x, body):
            label = supply.fresh_label("l", shape)
            redex = print_term(t)
            inner = subst_capt_var(body, c, cset(TermCap(label)), supply)
            inner = subst_term_var(inner, x, label, supply)
            state.frames.append(ScopeFrame(label))
            state.control = inner
            return Stepped(state, "enter", redex)

        case App(f, a):
            if isinstance(f, Label):
                for i in range(len(state.frames) - 1, -1, -1):
                    fr = state.frames[i]
                    if isinstance(fr, ScopeFrame) and fr.label == f:
                        redex = print_term(t)
                        del state.frames[i:]
                        state.control = Var(a)
                        return Stepped(state, "breakout", redex)
                return Stuck(
                    "scope-extrusion",
                    f"break capability {f.text}#{f.serial} invoked outside its scope",
                )
            v = store.get(f)
            if v is None:
                return Stuck("unbound-store", f"no store binding for {f.text}")
            if not isinstance(v, Lam):
                return Stuck("non-function", f"{f.text} is bound to a non-function value")
            redex = print_term(t)
            state.control = subst_term_var(v.body, v.param, a, supply)
            return Stepped(state, "apply", redex)

        case TApp(f, s):
            v = store.get(f)
            if v is None:
                return Stuck("unbound-store", f"no store binding for {f.text}")
            if not isinstance(v, TLam):
                return Stuck("non-function", f"{f.text} is bound to a non-type-function value")
            redex = print_term(t)
            state.control = subst_type_var(v.body, v.param, s, supply)
            return Stepped(state, "tapply", redex)

        case CApp(f, d):
            v = store.get(f)
            if v is None:
                return Stuck("unbound-store", f"no store binding for {f.text}")
            if not isinstance(v, CLam):
                return Stuck("non-function", f"{f.text} is bound to a non-capture-function value")
            redex = print_term(t)
            state.control = subst_capt_var(v.body, v.param, d, supply)
            return Stepped(state, "capply", redex)

    return Stuck("non-function", f"no rule applies to {print_term(t)}")


@dataclass
class EvalOutcome:
    kind: str  # "answer" | "stuck" | "fuel"
    state: MachineState
    steps: int
    stuck: Optional[Stuck] = None
    trace: list[str] = field(default_factory=list)

    @property
    def answer(self) -> Term:
        return self.state.control


def at_answer(state: MachineState) -> bool:
    _decompose(state)
    return is_answer(state.control) and not state.frames


def eval_term(
    t: Term, supply: NameSupply, fuel: int = 100_000, trace: bool = False
) -> EvalOutcome:
    """Iterate `step` up to `fuel` times; deterministic."""
    state = initial_state(t)
    lines: list[str] = []
    steps = 0
    while True:
        if at_answer(state):
            return EvalOutcome("answer", state, steps, trace=lines)
        if steps >= fuel:
            return EvalOutcome("fuel", state, steps, trace=lines)
        outcome = step(state, supply)
        if isinstance(outcome, Stuck):
            return EvalOutcome("stuck", state, steps, stuck=outcome, trace=lines)
        assert isinstance(outcome, Stepped)
        steps += 1
        if trace:
            lines.append(f"step {steps}: {outcome.rule} | {outcome.redex} | store {len(state.store)}")


def store_typing(store: dict[Name, Term], supply: NameSupply) -> Context:
    """Derive a typing context from a store, one binding per stored value."""
    ctx = EMPTY_CONTEXT
    for name, value in store.items():
        try:
            r = synth_scoped(ctx, value, supply)
        except CheckError as e:
            raise err(
                E_ILL_TYPED_STORE,
                f"store value {name.text} is ill-typed: {e.diag.message}",
            ) from e
        if isinstance(r.type, Existential):
            raise err(
                E_ILL_TYPED_STORE,
                f"store value {name.text} has an existential type",
            )
        ctx = ctx.bind_term(name, r.type)
    return ctx


# ---------------------------------------------------------------------------
# Soundness harnesses: executable preservation and progress
# ---------------------------------------------------------------------------


@dataclass
class Violation:
    kind: str  # "preservation" | "progress"
    step: int
    message: str


@dataclass
class SoundnessReport:
    steps: int
    outcome: str  # "answer" | "fuel" | "stuck"
    violations: list[Violation]

    @property
    def ok(self) -> bool:
        return not self.violations


def check_soundness(t: Term, supply: NameSupply, fuel: int = 100_000) -> SoundnessReport:
    """Run preservation and progress over every reached state.

    The program must be closed and well-typed; after each step the focus is
    re-typed under the store typing and its type must remain assignable to
    the original (up to subtyping under the extended context).
    """
    r0 = synth_capless(EMPTY_CONTEXT, t, supply)
    expected = r0.type
    violations: list[Violation] = []
    state = initial_state(t)
    steps = 0
    while steps < fuel:
        outcome = step(state, supply)
        if isinstance(outcome, AtAnswer):
            return SoundnessReport(steps, "answer", violations)
        if isinstance(outcome, Stuck):
            violations.append(
                Violation(
                    "progress",
                    steps,
                    f"well-typed state is stuck ({outcome.reason}): {outcome.message}",
                )
            )
            return SoundnessReport(steps, "stuck", violations)
        state = outcome.state
        steps += 1
        try:
            ctx = store_typing(state.store, supply)
            ri = synth_scoped(ctx, state.focus(), supply)
        except CheckError as e:
            violations.append(
                Violation(
                    "preservation",
                    steps,
                    f"state no longer type-checks after {outcome.rule}: {e.diag.message}",
                )
            )
            return SoundnessReport(steps, "stuck", violations)
        if not subtype_capless(ctx, ri.type, expected, supply):
            violations.append(
                Violation(
                    "preservation",
                    steps,
                    f"type not preserved after {outcome.rule}: "
                    f"{print_type(ri.type)} is not assignable to {print_type(expected)}",
                )
            )
    return SoundnessReport(steps, "fuel", violations)


def check_preservation(t: Term, supply: NameSupply, fuel: int = 100_000) -> SoundnessReport:
    report = check_soundness(t, supply, fuel)
    report.violations = [v for v in report.violations if v.kind == "preservation"]
    return report


def check_progress(t: Term, supply: NameSupply, fuel: int = 100_000) -> SoundnessReport:
    report = check_soundness(t, supply, fuel)
    report.violations = [v for v in report.violations if v.kind == "progress"]
    return report
