"""Conformance corpus runner and enumeration-based oracles.

The corpus is a set of source files plus a manifest; every entry runs
through the CLI pipeline and is checked against its expectation (golden
type/use line, diagnostic code, evaluation answer, trace rule, soundness
verdict, or translation goldens).

The oracles re-decide subcapturing and subtyping by declarative derivation
search over small enumerated families and compare against the algorithmic
relations, and restate the encoding's monotonicity/stability properties as
executable checks.
"""

from __future__ import annotations

import contextlib
import io
import itertools
import json
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional

from . import cli
from .capless_check import CaplessChecker
from .decap import Translator, empty_translation_context
from .subcapture import bound_subtype, subcapture_capless, subcapture_reacap
from .syntax import (
    CAP,
    CaplessType,
    CaptFun,
    CaptureSet,
    CaptVarCap,
    Name,
    NameSupply,
    ReachCap,
    TermCap,
    TermFun,
    TopShape,
    TVar,
    TypeFun,
    capt,
    cset,
    pure,
)
from .wellformed import CaptBind, Context, EMPTY_CONTEXT, TermBind


def corpus_dir() -> Path:
    return Path(__file__).parent / "corpus"


@dataclass
class EntryResult:
    id: str
    ok: bool
    detail: str = ""


@dataclass
class CorpusReport:
    results: list[EntryResult] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.results)

    def failures(self) -> list[EntryResult]:
        return [r for r in self.results if not r.ok]

    def summary(self) -> str:
        passed = sum(1 for r in self.results if r.ok)
        return f"{passed}/{len(self.results)} corpus entries passed"


def _run_cli(argv: list[str]) -> tuple[int, str, str]:
    out, errs = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(errs):
        code = cli.main(argv)
    return code, out.getvalue(), errs.getvalue()


def load_manifest(directory: Optional[Path] = None) -> list[dict]:
    directory = directory or corpus_dir()
    with open(directory / "manifest.json", "r", encoding="utf-8") as fh:
        return json.load(fh)


def run_entry(entry: dict, directory: Path, workdir: Path) -> EntryResult:
    path = str(directory / entry["file"])
    expect = entry["expect"]
    kind = expect["kind"]
    args = list(entry.get("args", []))

    if entry["command"] == "check":
        code, out, errs = _run_cli(["--json", "check", path, *args])
        if kind == "check":
            want = f"use: {expect['use']}  type: {expect['type']}"
            lines = [l for l in out.splitlines() if l.startswith("use: ")]
            got = lines[-1] if lines else ""
            if code != 0:
                return EntryResult(entry["id"], False, f"exit {code}: {errs or out}")
            if got != want:
                return EntryResult(entry["id"], False, f"golden mismatch:\n  want {want}\n  got  {got}")
            return EntryResult(entry["id"], True)
        if kind == "error":
            if code == 0:
                return EntryResult(entry["id"], False, "expected a diagnostic, got success")
            diags = json.loads(out) if out.strip().startswith("[") else []
            codes = {d["code"] for d in diags}
            if expect["code"] not in codes:
                return EntryResult(
                    entry["id"], False, f"expected {expect['code']}, got {sorted(codes)}"
                )
            return EntryResult(entry["id"], True)

    if entry["command"] == "eval":
        code, out, errs = _run_cli(["--json", "eval", path, *args])
        if kind == "answer":
            if code != 0:
                return EntryResult(entry["id"], False, f"exit {code}: {errs or out}")
            lines = [l for l in out.splitlines() if l.startswith("answer: ")]
            got = lines[-1][len("answer: "):] if lines else ""
            if got != expect["answer"]:
                return EntryResult(
                    entry["id"], False, f"answer mismatch: want {expect['answer']!r}, got {got!r}"
                )
            return EntryResult(entry["id"], True)
        if kind == "trace-rule":
            if code != 0:
                return EntryResult(entry["id"], False, f"exit {code}: {errs or out}")
            rules = [
                line.split("|")[0].split(":")[1].strip()
                for line in out.splitlines()
                if line.startswith("step ")
            ]
            if expect["rule"] not in rules:
                return EntryResult(
                    entry["id"], False, f"rule {expect['rule']} not in trace: {rules}"
                )
            return EntryResult(entry["id"], True)
        if kind == "soundness":
            if code != 0 or "soundness: sound" not in out:
                return EntryResult(entry["id"], False, f"exit {code}: {out}{errs}")
            return EntryResult(entry["id"], True)
        if kind == "exit":
            if code != expect["code"]:
                return EntryResult(
                    entry["id"], False, f"expected exit {expect['code']}, got {code}"
                )
            return EntryResult(entry["id"], True)

    if entry["command"] == "translate":
        out_path = workdir / (entry["id"] + ".out.cls")
        code, out, errs = _run_cli(["--json", "translate", path, "-o", str(out_path), *args])
        if kind == "error":
            diags = json.loads(out) if out.strip().startswith("[") else []
            codes = {d["code"] for d in diags}
            if code == 0 or expect["code"] not in codes:
                return EntryResult(
                    entry["id"], False, f"expected {expect['code']} (exit!=0), got exit {code} {sorted(codes)}"
                )
            return EntryResult(entry["id"], True)
        if code != 0:
            return EntryResult(entry["id"], False, f"exit {code}: {errs or out}")
        report = json.loads((out_path.parent / (out_path.name + ".report.json")).read_text())
        if not report["verified"]:
            return EntryResult(entry["id"], False, "translation did not verify")
        if "encoded_golden" in expect:
            golden = (directory / expect["encoded_golden"]).read_text().strip()
            if report["encodedType"] != golden:
                return EntryResult(
                    entry["id"],
                    False,
                    f"encoded type mismatch:\n  want {golden}\n  got  {report['encodedType']}",
                )
        for needle in expect.get("output_contains", []):
            text = out_path.read_text()
            if needle not in text:
                return EntryResult(entry["id"], False, f"output lacks {needle!r}")
        return EntryResult(entry["id"], True)

    return EntryResult(entry["id"], False, f"unknown entry form: {entry['command']}/{kind}")


def run_corpus(filter: Optional[str] = None, directory: Optional[Path] = None) -> CorpusReport:
    directory = directory or corpus_dir()
    entries = load_manifest(directory)
    report = CorpusReport()
    with tempfile.TemporaryDirectory() as tmp:
        for entry in entries:
            if filter and filter not in entry["id"]:
                continue
            report.results.append(run_entry(entry, directory, Path(tmp)))
    return report


# ---------------------------------------------------------------------------
# Declarative subcapturing oracle: saturation over a finite universe
# ---------------------------------------------------------------------------


def _declarative_subcapture(
    ctx_bindings: list[tuple],
    sets: list[frozenset],
    use_bounds: bool,
) -> set[tuple[frozenset, frozenset]]:
    """Saturate the declarative rules (incl. sc-set and sc-trans) to a
    fixpoint over a finite universe of capture sets."""
    universe = set(sets)
    rel: set[tuple[frozenset, frozenset]] = set()
    for s, t in itertools.product(sets, sets):
        if s <= t:
            rel.add((s, t))  # sc-elem
    for kind, atom, payload in ctx_bindings:
        if kind == "term" or (kind == "capt" and use_bounds):
            if payload is not None:
                rel.add((frozenset([atom]), payload))  # sc-var / sc-bound
    changed = True
    while changed:
        changed = False
        by_goal: dict[frozenset, list[frozenset]] = {}
        for s, t in rel:
            by_goal.setdefault(t, []).append(s)
        for t, subs in by_goal.items():
            for s1, s2 in itertools.product(subs, subs):
                u = s1 | s2
                if u in universe and (u, t) not in rel:
                    rel.add((u, t))  # sc-set
                    changed = True
        for s1, t1 in list(rel):
            for s2 in by_goal.get(s1, []):
                if (s2, t1) not in rel:
                    rel.add((s2, t1))  # sc-trans
                    changed = True
    return rel


def enumerate_subcapture_contexts(dialect: str) -> Iterable[tuple[Context, list, list]]:
    """Telescopes of <= 4 bindings with small bounds, plus their atom sets."""
    supply = NameSupply()
    if dialect == "capless":
        names = [supply.fresh(h) for h in ("x", "y", "c", "d")]
        kinds = ["term", "term", "capt", "capt"]
        mk_atom = {
            "term": lambda n: TermCap(n),
            "capt": lambda n: CaptVarCap(n),
        }
    else:
        names = [supply.fresh(h) for h in ("x", "y")]
        kinds = ["term", "term"]
        mk_atom = {"term": lambda n: TermCap(n)}

    def atom_choices(prefix_atoms: list) -> list[frozenset]:
        out = [frozenset()]
        for a in prefix_atoms:
            out.append(frozenset([a]))
        for a, b in itertools.combinations(prefix_atoms, 2):
            out.append(frozenset([a, b]))
        return out

    def grow(i: int, ctx: Context, bindings: list, atoms: list):
        yield ctx, bindings, atoms
        if i >= len(names):
            return
        n, kind = names[i], kinds[i]
        extra = []
        if dialect == "reacap":
            extra = [CAP] + [ReachCap(a.name) for a in atoms if isinstance(a, TermCap)]
        if kind == "term":
            for bound in atom_choices(atoms + extra):
                ty = (
                    capt(TopShape(), cset(*bound))
                    if dialect == "capless"
                    else _reacap_top(cset(*bound))
                )
                ctx2 = ctx.bind_term(n, ty)
                yield from grow(
                    i + 1,
                    ctx2,
                    bindings + [("term", TermCap(n), frozenset(bound))],
                    atoms + [TermCap(n)],
                )
        else:
            for b in [None] + atom_choices(atoms):
                ctx2 = ctx.bind_capt(n, None if b is None else cset(*b))
                yield from grow(
                    i + 1,
                    ctx2,
                    bindings + [("capt", CaptVarCap(n), None if b is None else frozenset(b))],
                    atoms + [CaptVarCap(n)],
                )

    yield from grow(0, EMPTY_CONTEXT, [], [])


def _reacap_top(captures: CaptureSet):
    from .syntax import ReacapType, RTop

    return ReacapType(RTop(), captures)


@dataclass
class OracleReport:
    checked: int = 0
    disagreements: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.disagreements


def crosscheck_subcapture(dialect: str) -> OracleReport:
    """Compare algorithmic subcapturing with the saturated declarative
    relation on every enumerated context and pair of sets (<= 3 atoms)."""
    report = OracleReport()
    algo = subcapture_capless if dialect == "capless" else subcapture_reacap
    seen = set()
    for ctx, bindings, atoms in enumerate_subcapture_contexts(dialect):
        key = tuple(bindings)
        if key in seen:
            continue
        seen.add(key)
        pool = list(atoms)
        if dialect == "reacap":
            pool = pool + [CAP] + [ReachCap(a.name) for a in atoms if isinstance(a, TermCap)]
        sets = [frozenset()]
        for r in (1, 2, 3):
            sets.extend(frozenset(c) for c in itertools.combinations(pool, r))
        rel = _declarative_subcapture(bindings, sets, use_bounds=(dialect == "capless"))
        for s, t in itertools.product(sets, sets):
            got = algo(ctx, cset(*s), cset(*t))
            want = (s, t) in rel
            report.checked += 1
            if got != want:
                report.disagreements.append(
                    f"{dialect}: {sorted(map(str, s))} <= {sorted(map(str, t))}: "
                    f"algorithm {got}, derivation search {want}"
                )
    return report


# ---------------------------------------------------------------------------
# Declarative subtyping oracle (Capless, small types, bounded-depth search)
# ---------------------------------------------------------------------------


def enumerate_small_types() -> tuple[Context, list[CaplessType]]:
    supply = NameSupply()
    x = supply.fresh("x")
    X = supply.fresh("X")
    ctx = EMPTY_CONTEXT.bind_type(X, TopShape()).bind_term(x, pure(TopShape()))
    csets = [cset(), cset(TermCap(x))]
    shapes0 = [TopShape(), TVar(X)]
    types0 = [capt(s, c) for s in shapes0 for c in csets]
    z = supply.fresh("z")
    c = supply.fresh("c")
    Y = supply.fresh("Y")
    shapes1 = list(shapes0)
    for pt in types0:
        for res in types0:
            shapes1.append(TermFun(z, pt, res))
    for res in types0[:2]:
        shapes1.append(TypeFun(Y, TopShape(), res))
        shapes1.append(CaptFun(c, None, res))
        shapes1.append(CaptFun(c, cset(TermCap(x)), res))
    types1 = [capt(s, c0) for s in shapes1 for c0 in csets]
    return ctx, types1


def _declarative_subtype(
    checker: CaplessChecker,
    ctx: Context,
    t1: CaplessType,
    t2: CaplessType,
    universe: list[CaplessType],
    depth: int,
    memo: dict,
) -> bool:
    """Bounded search over the declarative rules, including explicit trans."""
    from .syntax import alpha_eq

    key = (id(ctx), repr(t1), repr(t2), depth)
    if key in memo:
        return memo[key]
    memo[key] = False  # cycle guard
    result = False
    if alpha_eq(t1, t2):
        result = True
    if not result and isinstance(t2.shape, TopShape):
        result = subcapture_capless(ctx, t1.captures, t2.captures)
    if not result and depth > 0:
        result = _shape_decl(checker, ctx, t1, t2, universe, depth, memo)
    if not result and depth > 0:
        for mid in universe:
            if _declarative_subtype(checker, ctx, t1, mid, universe, depth - 1, memo) and \
               _declarative_subtype(checker, ctx, mid, t2, universe, depth - 1, memo):
                result = True
                break
    memo[key] = result
    return result


def _shape_decl(checker, ctx, t1, t2, universe, depth, memo) -> bool:
    from .syntax import alpha_eq, subst_capt_var, subst_term_var, subst_type_var

    if not subcapture_capless(ctx, t1.captures, t2.captures):
        return False
    s1, s2 = t1.shape, t2.shape
    if alpha_eq(s1, s2):
        return True  # shape-level refl under capt
    if isinstance(s1, TVar):
        b = ctx.lookup(s1.name)
        from .wellformed import TypeBind

        if isinstance(b, TypeBind) and _declarative_subtype(
            checker, ctx, capt(b.bound, t1.captures), t2, universe, depth - 1, memo
        ):
            return True
    match s1, s2:
        case TermFun(p1, a1, r1), TermFun(p2, a2, r2):
            if not _declarative_subtype(checker, ctx, a2, a1, universe, depth - 1, memo):
                return False
            r2r = subst_term_var(r2, p2, p1, checker.supply)
            ctx2 = ctx.bind_term(p1, a2)
            return _declarative_subtype(checker, ctx2, r1, r2r, universe, depth - 1, memo)
        case TypeFun(p1, b1, r1), TypeFun(p2, b2, r2):
            if not checker.subtype_shape(ctx, b2, b1):
                return False
            r2r = subst_type_var(r2, p2, TVar(p1), checker.supply)
            ctx2 = ctx.bind_type(p1, b2)
            return _declarative_subtype(checker, ctx2, r1, r2r, universe, depth - 1, memo)
        case CaptFun(p1, b1, r1), CaptFun(p2, b2, r2):
            if not bound_subtype(ctx, b2, b1):
                return False
            r2r = subst_capt_var(r2, p2, cset(CaptVarCap(p1)), checker.supply)
            ctx2 = ctx.bind_capt(p1, b2)
            return _declarative_subtype(checker, ctx2, r1, r2r, universe, depth - 1, memo)
    return False


def crosscheck_subtype(depth: int = 4) -> OracleReport:
    report = OracleReport()
    ctx, universe = enumerate_small_types()
    supply = NameSupply(10_000)
    checker = CaplessChecker(supply)
    memo: dict = {}
    for t1, t2 in itertools.product(universe, universe):
        got = checker.subtype_type(ctx, t1, t2)
        want = _declarative_subtype(checker, ctx, t1, t2, universe, depth, memo)
        report.checked += 1
        if got != want:
            from .frontend import print_type

            report.disagreements.append(
                f"{print_type(t1)} <= {print_type(t2)}: algorithm {got}, search {want}"
            )
    return report


# ---------------------------------------------------------------------------
# Encoding properties as executable checks
# ---------------------------------------------------------------------------


def crosscheck_encoding() -> OracleReport:
    """Monotonicity in the interpretation, stability for cap-free sets, and
    determinism of the capture-set encoding over an enumerated family."""
    from .wellformed import EMPTY_DEFS

    report = OracleReport()
    supply = NameSupply()
    x = supply.fresh("x")
    c1 = supply.fresh("c1")
    c2 = supply.fresh("c2")
    target = (
        EMPTY_CONTEXT.bind_capt(c1, None)
        .bind_capt(c2, cset(CaptVarCap(c1)))
        .bind_term(x, capt(TopShape(), cset(CaptVarCap(c1))))
    )
    tr = Translator(EMPTY_DEFS, supply)
    target_sets = [
        cset(),
        cset(CaptVarCap(c1)),
        cset(CaptVarCap(c2)),
        cset(TermCap(x)),
        cset(CaptVarCap(c1), TermCap(x)),
    ]
    src = supply.fresh("s")
    rho = {src: cset(TermCap(x))}
    rho_star = {src: cset(CaptVarCap(c2))}
    source_sets = [
        cset(),
        cset(TermCap(src)),
        cset(ReachCap(src)),
        cset(CAP),
        cset(TermCap(src), CAP),
        cset(ReachCap(src), CAP),
    ]
    from .decap import TranslationContext

    for d1, d2 in itertools.product(target_sets, target_sets):
        if not subcapture_capless(target, d1, d2):
            continue
        for c in source_sets:
            tau1 = TranslationContext(d1, rho, rho_star)
            tau2 = TranslationContext(d2, rho, rho_star)
            i1 = tr.encode_cset(tau1, c)
            i2 = tr.encode_cset(tau2, c)
            report.checked += 1
            if not subcapture_capless(target, i1, i2):
                report.disagreements.append(f"monotonicity fails for {c!r} under {d1!r}<={d2!r}")
            if CAP not in c:
                i0 = tr.encode_cset(TranslationContext(cset(), rho, rho_star), c)
                if i0 != i1:
                    report.disagreements.append(f"redundant interpretation fails for {c!r}")
            if tr.encode_cset(tau1, c) != i1:
                report.disagreements.append(f"encoding not deterministic for {c!r}")
    return report


def enumerate_and_crosscheck() -> dict[str, OracleReport]:
    return {
        "subcapture-capless": crosscheck_subcapture("capless"),
        "subcapture-reacap": crosscheck_subcapture("reacap"),
        "subtype-capless": crosscheck_subtype(),
        "encoding": crosscheck_encoding(),
    }
