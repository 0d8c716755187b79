"""Typing of expressions, processes and sessions.

Inference is syntax directed. ``rec X . P`` is typed equi-recursively as
``rec X . T`` where ``T`` is the type of ``P`` with ``X`` bound to the type
variable ``X``, so no annotation is needed on recursion. Input binders must
carry their annotated sort.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .calculus import (
    BINARY_OPS,
    SORTS,
    UNARY_OPS,
    AnnotatedSort,
    BinOp,
    ExtChoice,
    Expr,
    Inact,
    Input,
    IntChoice,
    Lit,
    Output,
    Process,
    PVar,
    Rec,
    Session,
    UnOp,
    Var,
    check_guarded,
    choice_leaves,
)
from .errors import (
    DuplicateLabel,
    DuplicateParticipant,
    MissingAnnotation,
    MissingParticipant,
    MixedPeers,
    SessionsError,
    SortMismatch,
    TopicMismatch,
    TypingError,
    UnboundVariable,
    UnknownOperator,
    UnsafeType,
)
from .security import Level, Participant, Security, Topic
from .session_types import (
    END,
    Branch,
    GlobalType,
    In,
    Out,
    SessionType,
    TRec,
    TVar,
    participants,
    project,
    subtype_failure,
    unfold_type,
    unsafe_reason,
    wf_global_type,
)

WriteSummary = dict[Topic, Level]


@dataclass(frozen=True)
class Environment:
    exprs: Mapping[str, AnnotatedSort] = field(default_factory=dict)
    procs: Mapping[str, SessionType] = field(default_factory=dict)

    def bind(self, x: str, sort: AnnotatedSort) -> "Environment":
        return Environment({**self.exprs, x: sort}, self.procs)

    def bind_proc(self, name: str, t: SessionType) -> "Environment":
        return Environment(self.exprs, {**self.procs, name: t})


EMPTY = Environment()


def meet_summaries(a: WriteSummary, b: WriteSummary, sec: Security) -> WriteSummary:
    """Pointwise meet; a missing topic counts as top."""
    out = dict(a)
    for topic, level in b.items():
        out[topic] = sec.lattice.meet(out[topic], level) if topic in out else level
    return out


def _check_annotation(s: AnnotatedSort, sec: Security) -> None:
    if s.sort not in SORTS:
        raise SortMismatch(f"unknown sort {s.sort!r}")
    sec.lattice._check(s.level)
    sec.universe._check(s.topic)


def type_expr(env: Environment, e: Expr, sec: Security) -> AnnotatedSort:
    match e:
        case Var(x):
            if x not in env.exprs:
                raise UnboundVariable(f"unbound variable {x!r}")
            return env.exprs[x]
        case Lit(v):
            s = v.annotation
            _check_annotation(s, sec)
            return s
        case BinOp(op, left, right):
            if op not in BINARY_OPS:
                raise UnknownOperator(f"unknown operator {op!r}")
            a, b = type_expr(env, left, sec), type_expr(env, right, sec)
            if a.topic != b.topic:
                raise TopicMismatch(f"{op!r} combines topics {a.topic!r} and {b.topic!r} in {e}")
            result = BINARY_OPS[op][0].get((a.sort, b.sort))
            if result is None:
                raise SortMismatch(f"{op!r} is not defined on {a.sort}, {b.sort}")
            return AnnotatedSort(result, sec.join(a.level, b.level), a.topic)
        case UnOp(op, arg):
            if op not in UNARY_OPS:
                raise UnknownOperator(f"unknown operator {op!r}")
            a = type_expr(env, arg, sec)
            result = UNARY_OPS[op][0].get(a.sort)
            if result is None:
                raise SortMismatch(f"{op!r} is not defined on {a.sort}")
            return AnnotatedSort(result, a.level, a.topic)
    raise TypeError(f"not an expression: {e!r}")


def _merge(kind: type, types: list[SessionType], what: str) -> SessionType:
    heads = [unfold_type(t) for t in types]
    if len(heads) == 1:
        return types[0]
    for h in heads:
        if not isinstance(h, kind):
            raise MixedPeers(f"{what} branch has type {h}, which cannot join a choice")
    peers = {h.peer for h in heads}
    if len(peers) > 1:
        raise MixedPeers(f"{what} addresses several partners: {sorted(peers)}")
    branches: list[Branch] = []
    for h in heads:
        branches.extend(h.branches)
    labels = [b.label for b in branches]
    dup = sorted({l for l in labels if labels.count(l) > 1})
    if dup:
        raise DuplicateLabel(f"{what} repeats label(s) {dup} towards {peers.pop()}")
    return kind(heads[0].peer, tuple(branches))


def infer_process(env: Environment, p: Process, sec: Security) -> tuple[SessionType, WriteSummary]:
    """The session type of ``p`` together with its write summary."""
    match p:
        case Output(q, label, e, cont):
            step = f"{q}!{label}"
            try:
                s = type_expr(env, e, sec)
                t, delta = infer_process(env, cont, sec)
            except TypingError as err:
                raise err.at(step) from None
            return Out(q, (Branch(label, s, t),)), meet_summaries(delta, {s.topic: s.level}, sec)
        case Input(q, label, x, annot, cont):
            step = f"{q}?{label}"
            if annot is None:
                raise MissingAnnotation(f"input binder {x!r} has no sort annotation", (step,))
            _check_annotation(annot, sec)
            try:
                t, delta = infer_process(env.bind(x, annot), cont, sec)
            except TypingError as err:
                raise err.at(step) from None
            return In(q, (Branch(label, annot, t),)), delta
        case IntChoice() | ExtChoice():
            internal = isinstance(p, IntChoice)
            results = []
            for i, leaf in enumerate(choice_leaves(p)):
                try:
                    results.append(infer_process(env, leaf, sec))
                except TypingError as err:
                    raise err.at(f"{'(+)' if internal else '+'}[{i}]") from None
            delta: WriteSummary = {}
            for _, d in results:
                delta = meet_summaries(delta, d, sec)
            kind, what = (Out, "internal choice") if internal else (In, "external choice")
            return _merge(kind, [t for t, _ in results], what), delta
        case Rec(x, body):
            t, delta = infer_process(env.bind_proc(x, TVar(x)), body, sec)
            return TRec(x, t), delta
        case PVar(x):
            if x not in env.procs:
                raise UnboundVariable(f"unbound process variable {x!r}")
            return env.procs[x], {}
        case Inact():
            return END, {}
    raise TypeError(f"not a process: {p!r}")


def check_process(env: Environment, p: Process, expected: SessionType, sec: Security) -> SessionType:
    """Check ``p`` against ``expected`` and return the type assigned to ``p``.

    Succeeds when the inferred type is a safe subtype of ``expected``. Extra
    input branches of ``p`` thereby have to be safe too.
    """
    reason = unsafe_reason(expected, sec)
    if reason:
        raise UnsafeType(f"expected type {expected} is not safe: {reason}")
    check_guarded(p)
    t, _ = infer_process(env, p, sec)
    fail = subtype_failure(t, expected)
    if fail:
        path, cls, message = fail
        raise cls(message, path)
    reason = unsafe_reason(t, sec)
    if reason:
        raise UnsafeType(f"process type {t} is not safe: {reason}")
    return t


@dataclass
class ParticipantVerdict:
    participant: Participant
    ok: bool
    projection: SessionType | None = None
    process_type: SessionType | None = None
    error: str | None = None
    message: str = ""
    path: tuple[str, ...] = ()


@dataclass
class SessionReport:
    ok: bool
    verdicts: list[ParticipantVerdict]
    errors: list[tuple[str, str]]  # (kind, message) for session-level failures

    def first_error_kind(self) -> str | None:
        if self.errors:
            return self.errors[0][0]
        for v in self.verdicts:
            if not v.ok:
                return v.error
        return None


def check_session(n: Session, g: GlobalType, sec: Security) -> SessionReport:
    """Type a session against a global type: each participant's process must
    check against its (safe) projection."""
    errors: list[tuple[str, str]] = []
    try:
        wf_global_type(g)
    except SessionsError as err:
        return SessionReport(False, [], [(err.kind, str(err))])

    names = n.participants
    dups = sorted({p for p in names if names.count(p) > 1})
    if dups:
        errors.append((DuplicateParticipant.kind, f"participant(s) {dups} occur more than once"))
    missing = sorted(participants(g) - set(names))
    if missing:
        errors.append((MissingParticipant.kind, f"global type involves {missing}, absent from the session"))

    verdicts = []
    for who, proc in n:
        verdict = ParticipantVerdict(who, ok=False)
        try:
            verdict.projection = project(g, who)
            reason = unsafe_reason(verdict.projection, sec)
            if reason:
                raise UnsafeType(f"projection onto {who} is not safe: {reason}")
            verdict.process_type = check_process(EMPTY, proc, verdict.projection, sec)
            verdict.ok = True
        except SessionsError as err:
            verdict.error = err.kind
            verdict.message = str(err)
            verdict.path = getattr(err, "path", ())
        verdicts.append(verdict)
    ok = not errors and all(v.ok for v in verdicts)
    return SessionReport(ok, verdicts, errors)


def typable(n: Session, g: GlobalType, sec: Security) -> bool:
    return check_session(n, g, sec).ok
