"""Command-line entry point: check, eval, translate.

Exit codes are a stable contract: 0 success, 1 type error (or a stuck
well-typed program under eval), 2 parse/IO error, 3 out of fuel,
4 translation verification mismatch.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass

from .capless_check import synth_capless
from .capless_eval import check_soundness, eval_term
from .decap import verify_translation
from .diagnostics import CheckError, Diagnostic, E_IO, E_STUCK, E_FUEL, InternalError
from .frontend import SourceFile, dialect_for_path, parse, print_cset, print_term, print_type
from .reacap_check import synth_reacap
from .syntax import Term
from .wellformed import EMPTY_CONTEXT, Context, wf_typedef_context

EXIT_OK = 0
EXIT_TYPE = 1
EXIT_PARSE = 2
EXIT_FUEL = 3
EXIT_VERIFY = 4


def _color_enabled() -> bool:
    env = os.environ.get("CAPLESS_COLOR")
    if env == "0":
        return False
    if env == "1":
        return True
    return sys.stderr.isatty()


@dataclass
class Session:
    json_output: bool
    diagnostics: list[Diagnostic]

    def emit(self, diag: Diagnostic, file: str | None = None) -> None:
        if file is not None and diag.file is None:
            diag.file = file
        self.diagnostics.append(diag)

    def flush(self) -> None:
        if self.json_output:
            print(json.dumps([d.to_json() for d in self.diagnostics], indent=2))
        else:
            for d in self.diagnostics:
                print(d.render(color=_color_enabled()), file=sys.stderr)


def _load(path: str, dialect_flag: str | None, session: Session) -> SourceFile | int:
    dialect = dialect_flag or dialect_for_path(path)
    if dialect is None:
        session.emit(
            Diagnostic(
                "error",
                E_IO,
                f"cannot infer the dialect of {path}; use --dialect or a "
                ".cls/.rcp extension",
            )
        )
        return EXIT_PARSE
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        session.emit(Diagnostic("error", E_IO, f"cannot read {path}: {e}"))
        return EXIT_PARSE
    try:
        return parse(text, dialect)
    except CheckError as e:
        session.emit(e.diag, file=path)
        return EXIT_PARSE


def _context_from_assumes(src: SourceFile) -> Context:
    ctx = EMPTY_CONTEXT
    for name, ty in src.assumes:
        ctx = ctx.bind_term(name, ty)
    return ctx


def _check_file(src: SourceFile, path: str, session: Session, forbid_cap_unbox: bool):
    """Shared checking pipeline; returns the typing result or an exit code."""
    diags = wf_typedef_context(src.typedefs)
    if diags:
        for d in diags:
            session.emit(d, file=path)
        return EXIT_TYPE
    ctx = _context_from_assumes(src)
    try:
        if src.dialect == "capless":
            return synth_capless(ctx, src.term, src.supply)
        return synth_reacap(
            src.typedefs, ctx, src.term, src.supply, forbid_cap_unbox=forbid_cap_unbox
        )
    except CheckError as e:
        session.emit(e.diag, file=path)
        return EXIT_TYPE


def cmd_check(args, session: Session) -> int:
    src = _load(args.path, args.dialect, session)
    if isinstance(src, int):
        return src
    result = _check_file(src, args.path, session, args.forbid_cap_unbox)
    if isinstance(result, int):
        return result
    print(f"use: {print_cset(result.use)}  type: {print_type(result.type)}")
    return EXIT_OK


def cmd_eval(args, session: Session) -> int:
    src = _load(args.path, args.dialect, session)
    if isinstance(src, int):
        return src
    if src.dialect != "capless":
        session.emit(Diagnostic("error", E_IO, "eval expects a Capless (.cls) program"))
        return EXIT_PARSE
    if src.assumes:
        session.emit(
            Diagnostic("error", E_IO, "eval requires a closed program (no assume declarations)")
        )
        return EXIT_PARSE
    if not args.unsafe:
        result = _check_file(src, args.path, session, False)
        if isinstance(result, int):
            return result
    if args.check_soundness:
        report = check_soundness(src.term, src.supply, fuel=args.fuel)
        for v in report.violations:
            print(f"{v.kind} violation at step {v.step}: {v.message}")
        verdict = "sound" if report.ok else "UNSOUND"
        print(f"soundness: {verdict} ({report.steps} step(s), outcome {report.outcome})")
        return EXIT_OK if report.ok else EXIT_TYPE
    outcome = eval_term(src.term, src.supply, fuel=args.fuel, trace=args.trace)
    for line in outcome.trace:
        print(line)
    if outcome.kind == "answer":
        print(f"answer: {print_term(outcome.answer)}")
        return EXIT_OK
    if outcome.kind == "fuel":
        session.emit(
            Diagnostic("error", E_FUEL, f"out of fuel after {outcome.steps} step(s)")
        )
        return EXIT_FUEL
    session.emit(
        Diagnostic(
            "error",
            E_STUCK,
            f"stuck after {outcome.steps} step(s): {outcome.stuck.message}"
            + ("" if args.unsafe else " (soundness alarm on a checked program)"),
        )
    )
    return EXIT_TYPE


def cmd_translate(args, session: Session) -> int:
    src = _load(args.path, args.dialect, session)
    if isinstance(src, int):
        return src
    if src.dialect != "reacap":
        session.emit(Diagnostic("error", E_IO, "translate expects a Reacap (.rcp) program"))
        return EXIT_PARSE
    diags = wf_typedef_context(src.typedefs)
    if diags:
        for d in diags:
            session.emit(d, file=args.path)
        return EXIT_TYPE
    try:
        synth_reacap(src.typedefs, _context_from_assumes(src), src.term, src.supply)
    except CheckError as e:
        session.emit(e.diag, file=args.path)
        return EXIT_TYPE
    if src.assumes:
        from .diagnostics import E_TRANSLATE_UNSUPPORTED

        session.emit(
            Diagnostic(
                "error",
                E_TRANSLATE_UNSUPPORTED,
                "translation requires a program closed up to type definitions",
            )
        )
        return EXIT_TYPE
    try:
        if args.verify:
            out_term, report = verify_translation(src.typedefs, src.term, src.supply)
        else:
            from .decap import translate_program

            out_term, expected, _ = translate_program(src.typedefs, src.term, src.supply)
            report = None
    except CheckError as e:
        session.emit(e.diag, file=args.path)
        return EXIT_VERIFY if e.diag.code == "E-TRANSLATE-MISMATCH" else EXIT_TYPE
    except InternalError as e:
        session.emit(Diagnostic("error", "E-INTERNAL", e.message))
        return EXIT_VERIFY
    out_path = args.output or (os.path.splitext(args.path)[0] + ".cls")
    text = print_term(out_term) + "\n"
    try:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
        if report is not None:
            with open(out_path + ".report.json", "w", encoding="utf-8") as fh:
                json.dump(report.to_json(), fh, indent=2)
                fh.write("\n")
    except OSError as e:
        session.emit(Diagnostic("error", E_IO, f"cannot write {out_path}: {e}"))
        return EXIT_PARSE
    print(f"wrote {out_path}")
    if report is not None:
        print(f"verified: {report.verified}")
        print(f"encoded type: {report.encoded_type}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="capcalc",
        description="Check, evaluate and translate Capless/Reacap programs.",
    )
    p.add_argument("--json", action="store_true", help="emit diagnostics as JSON")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="parse and type-check a program")
    c.add_argument("path")
    c.add_argument("--dialect", choices=["capless", "reacap"])
    c.add_argument(
        "--forbid-cap-unbox",
        action="store_true",
        help="also reject unboxing boxes whose annotation mentions cap",
    )
    c.set_defaults(fn=cmd_check)

    e = sub.add_parser("eval", help="evaluate a Capless program")
    e.add_argument("path")
    e.add_argument("--dialect", choices=["capless", "reacap"])
    e.add_argument("--fuel", type=int, default=100_000)
    e.add_argument("--trace", action="store_true", help="print one line per step")
    e.add_argument("--unsafe", action="store_true", help="evaluate without type-checking")
    e.add_argument(
        "--check-soundness",
        action="store_true",
        help="re-check preservation and progress at every step",
    )
    e.set_defaults(fn=cmd_eval)

    t = sub.add_parser("translate", help="elaborate a Reacap program into Capless")
    t.add_argument("path")
    t.add_argument("--dialect", choices=["capless", "reacap"])
    t.add_argument("-o", "--output")
    t.add_argument(
        "--verify",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="re-check the output against the encoded type (default on)",
    )
    t.set_defaults(fn=cmd_translate)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    session = Session(args.json, [])
    try:
        code = args.fn(args, session)
    finally:
        session.flush()
    return code


if __name__ == "__main__":
    sys.exit(main())
