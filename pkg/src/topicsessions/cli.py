"""Command line entry point: ``sessions check|project|oracle|simulate|soundness|sr FILE``.

Exit codes: 0 when the verdict is ok, 1 for a semantic failure (ill-typed,
unsafe, not projectable, property FAIL), 2 for unreadable or malformed input.
"""

from __future__ import annotations

import argparse
import os
import random
import sys

from .calculus import Session, step_session
from .checker import check_session
from .errors import DSLSyntaxError, NotProjectable, SessionsError
from .oracle import check_safe_session
from .properties import soundness_property, subject_reduction_property
from .reports import (
    finding,
    property_report,
    report,
    safety_report,
    session_report,
    trace_to_json,
    write_json,
)
from .session_types import participants, project, unsafe_reason
from .syntax import Model, parse_model

OK, FAILED, BAD_INPUT = 0, 1, 2


class InputError(Exception):
    """Bad command line input that is not a DSL error (missing file, unknown name)."""


def _use_color() -> bool:
    flag = os.environ.get("SESSIONS_COLOR")
    if flag is not None:
        return flag == "1"
    return sys.stdout.isatty()


def _paint(text: str, good: bool) -> str:
    if not _use_color():
        return text
    return f"\033[{32 if good else 31}m{text}\033[0m"


def _pick(table: dict, name: str | None, what: str):
    if name is not None:
        if name not in table:
            raise InputError(f"no {what} named {name!r} (have: {', '.join(sorted(table)) or 'none'})")
        return table[name]
    if len(table) != 1:
        raise InputError(f"model declares {len(table)} {what}s; choose one with --{what}")
    return next(iter(table.values()))


def _load(path: str) -> tuple[Model, str]:
    try:
        with open(path, encoding="utf-8") as fh:
            source = fh.read()
    except OSError as err:
        raise InputError(f"cannot read {path}: {err.strerror}") from None
    return parse_model(source), source


def _emit(doc: dict, args) -> None:
    if args.json:
        write_json(doc, args.json)


# -- commands ------------------------------------------------------------------------


def cmd_check(model: Model, source: str, args) -> int:
    n = _pick(model.sessions, args.session, "session")
    g = _pick(model.globals, args.global_, "global")
    rep = check_session(n, g, model.security)
    for kind, msg in rep.errors:
        print(_paint(f"error {kind}: {msg}", False))
    for v in rep.verdicts:
        if v.ok:
            print(_paint(f"{v.participant}: ok", True) + f"  {v.process_type}")
        else:
            where = f" at {' / '.join(v.path)}" if v.path else ""
            print(_paint(f"{v.participant}: {v.error}{where}", False) + f"  {v.message}")
    print(_paint("well-typed" if rep.ok else "ill-typed", rep.ok))
    _emit(session_report(rep, source), args)
    return OK if rep.ok else FAILED


def cmd_project(model: Model, source: str, args) -> int:
    g = _pick(model.globals, args.global_, "global")
    who = [args.participant] if args.participant else sorted(participants(g))
    findings, projections, ok = [], {}, True
    for p in who:
        try:
            t = project(g, p)
        except NotProjectable as err:
            print(_paint(f"{p}: NotProjectable", False) + f"  {err}")
            findings.append(finding(err.kind, detail=f"{p}: {err}"))
            ok = False
            continue
        projections[p] = str(t)
        line = str(t) if args.participant else f"{p}: {t}"
        if args.check_safe:
            reason = unsafe_reason(t, model.security)
            if reason:
                ok = False
                findings.append(finding("UnsafeType", detail=f"{p}: {reason}"))
                line += "  " + _paint(f"[unsafe: {reason}]", False)
            else:
                line += "  " + _paint("[safe]", True)
        print(line)
    _emit(report("project", "ok" if ok else "failed", source, findings, projections=projections), args)
    return OK if ok else FAILED


def cmd_oracle(model: Model, source: str, args) -> int:
    n = _pick(model.sessions, args.session, "session")
    rep = check_safe_session(n, args.depth, model.security)
    for v in rep.violations:
        print(_paint(f"{v.kind} violation at {list(v.indices)}", False) + f"  {v.explanation}")
        print(f"  trace: {' . '.join(str(a) for a in v.trace)}")
    summary = f"{len(rep.violations)} violation(s) in {rep.traces_explored} traces up to depth {args.depth}"
    print(_paint(("safe: " if rep.safe else "unsafe: ") + summary, rep.safe))
    _emit(safety_report(rep, source), args)
    return OK if rep.safe else FAILED


def random_walk(n: Session, depth: int, seed: int, model: Model) -> list:
    """Follow one seeded path of at most ``depth`` transitions."""
    rng = random.Random(seed)
    trace = []
    for _ in range(depth):
        options = sorted(step_session(n, model.lattice), key=lambda s: (str(s[0]), str(s[1])))
        if not options:
            break
        act, n = rng.choice(options)
        trace.append(act)
    return trace


def cmd_simulate(model: Model, source: str, args) -> int:
    n = _pick(model.sessions, args.session, "session")
    trace = random_walk(n, args.depth, args.seed, model)
    for act in trace:
        print(act)
    _emit(report("simulate", "ok", source, [], seed=args.seed, depth=args.depth, trace=trace_to_json(tuple(trace))), args)
    return OK


def _property(command: str, rep, source: str, args) -> int:
    status = rep.verdict + (" (vacuous)" if rep.vacuous else "")
    print(_paint(f"{rep.name}: {status}", rep.passed) + f"  {rep.detail}")
    if rep.witness:
        print(f"  witness: {' . '.join(str(a) for a in rep.witness)}")
    _emit(property_report(command, rep, source), args)
    return OK if rep.passed else FAILED


def cmd_soundness(model: Model, source: str, args) -> int:
    n = _pick(model.sessions, args.session, "session")
    g = _pick(model.globals, args.global_, "global")
    return _property("soundness", soundness_property(n, g, model.security, args.depth), source, args)


def cmd_sr(model: Model, source: str, args) -> int:
    n = _pick(model.sessions, args.session, "session")
    g = _pick(model.globals, args.global_, "global")
    return _property("sr", subject_reduction_property(n, g, model.security, args.steps), source, args)


COMMANDS = {
    "check": cmd_check,
    "project": cmd_project,
    "oracle": cmd_oracle,
    "simulate": cmd_simulate,
    "soundness": cmd_soundness,
    "sr": cmd_sr,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sessions", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("file")
        if name == "project":
            cmd.add_argument("participant", nargs="?")
            cmd.add_argument("--check-safe", action="store_true")
        if name != "project":
            cmd.add_argument("--session")
        if name in ("check", "project", "soundness", "sr"):
            cmd.add_argument("--global", dest="global_")
        cmd.add_argument("--depth", type=int, default=6 if name == "soundness" else 5)
        cmd.add_argument("--steps", type=int, default=5)
        cmd.add_argument("--seed", type=int, default=0)
        cmd.add_argument("--json", metavar="PATH", help="write a JSON report ('-' for stdout)")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_:
        return BAD_INPUT if exit_.code else OK
    if args.depth < 0 or args.steps < 0:
        print("error: --depth and --steps must be non-negative", file=sys.stderr)
        return BAD_INPUT
    try:
        model, source = _load(args.file)
        return COMMANDS[args.command](model, source, args)
    except DSLSyntaxError as err:
        print(f"{args.file}:{err} [{err.kind}]", file=sys.stderr)
        return BAD_INPUT
    except (InputError, SessionsError) as err:
        kind = getattr(err, "kind", "InputError")
        print(f"{args.file}: {kind}: {err}", file=sys.stderr)
        return BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
