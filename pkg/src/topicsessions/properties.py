"""Executable checks of subject reduction and soundness, plus a random
generator of (mostly) typable models to run them on."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .calculus import (
    INACT,
    SORTS,
    AnnotatedSort,
    BinOp,
    Input,
    Lit,
    Output,
    Process,
    PVar,
    Rec,
    Session,
    Tau,
    Value,
    Var,
    ext_choice,
    int_choice,
    step_session,
)
from .checker import SessionReport, check_session
from .errors import NotProjectable
from .oracle import check_safe_session
from .security import ReadingPolicy, Security, TopicUniverse, chain, validate_lattice
from .session_types import (
    END,
    Branch,
    Comm,
    End,
    GlobalType,
    In,
    Out,
    SessionType,
    TRec,
    TVar,
    project,
    reduce_global,
    reduce_type_star,
    type_equiv,
)


@dataclass
class PropertyReport:
    name: str
    passed: bool
    vacuous: bool = False
    detail: str = ""
    witness: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"


def soundness_property(n: Session, g: GlobalType, sec: Security, depth: int) -> PropertyReport:
    """A typable session shows no AC/LF violation up to ``depth``."""
    typing = check_session(n, g, sec)
    if not typing.ok:
        return PropertyReport("soundness", True, vacuous=True, detail="session is not typable")
    report = check_safe_session(n, depth, sec)
    stats = {"depth": depth, "traces": report.traces_explored}
    if report.violations:
        v = report.violations[0]
        return PropertyReport(
            "soundness",
            False,
            detail=f"typable session violates {v.kind} at {v.indices}: {v.explanation}",
            witness=list(v.trace),
            stats=stats,
        )
    return PropertyReport("soundness", True, detail=f"no violation in {report.traces_explored} traces", stats=stats)


def _verdict_types(report: SessionReport) -> dict[str, SessionType]:
    return {v.participant: v.process_type for v in report.verdicts}


def _types_follow(old: SessionType, new: SessionType) -> bool:
    return any(type_equiv(r, new) for r in reduce_type_star(old, 1))


def subject_reduction_property(n: Session, g: GlobalType, sec: Security, steps: int) -> PropertyReport:
    """Every reduction of a typable session stays typable against the global
    type itself (τ) or its residual (message), and the moving participants'
    types reduce accordingly."""
    start = check_session(n, g, sec)
    if not start.ok:
        return PropertyReport("subject-reduction", True, vacuous=True, detail="session is not typable")
    explored = 0
    stack = [(n, g, start, ())]
    while stack:
        current, glob, report, path = stack.pop()
        if len(path) >= steps:
            continue
        for act, after in sorted(step_session(current, sec.lattice), key=lambda s: (str(s[0]), str(s[1]))):
            explored += 1
            trail = list(path) + [act]
            if isinstance(act, Tau):
                candidates = [glob]
                movers = [p for (p, a), (_, b) in zip(current, after) if a != b]
            else:
                candidates = [
                    g2 for p, label, q, g2 in reduce_global(glob) if (p, label, q) == (act.sender, act.label, act.receiver)
                ] + [glob]
                movers = [act.sender, act.receiver]
            found = None
            for g2 in candidates:
                r2 = check_session(after, g2, sec)
                if r2.ok:
                    found = (g2, r2)
                    break
            if found is None:
                return PropertyReport(
                    "subject-reduction",
                    False,
                    detail=f"no residual of {glob} types {after} after {act}",
                    witness=trail,
                    stats={"explored": explored},
                )
            g2, r2 = found
            before_types, after_types = _verdict_types(report), _verdict_types(r2)
            for who in movers:
                if not _types_follow(before_types[who], after_types[who]):
                    return PropertyReport(
                        "subject-reduction",
                        False,
                        detail=f"type of {who} went from {before_types[who]} to {after_types[who]}, not a reduct",
                        witness=trail,
                        stats={"explored": explored},
                    )
            stack.append((after, g2, r2, tuple(trail)))
    return PropertyReport(
        "subject-reduction", True, detail=f"{explored} transitions re-typed", stats={"explored": explored}
    )


# -- random models -------------------------------------------------------------------

LATTICES = {
    "two": lambda: chain("bot", "top"),
    "three": lambda: chain("bot", "mid", "top"),
    "diamond": lambda: validate_lattice(
        ["bot", "a", "b", "top"], [("bot", "a"), ("bot", "b"), ("a", "top"), ("b", "top")]
    ),
}
LABELS = ("a", "b", "c")


@dataclass
class Instance:
    session: Session
    global_type: GlobalType
    security: Security


def random_security(rng: random.Random) -> Security:
    lattice = LATTICES[rng.choice(sorted(LATTICES))]()
    topics = ["t0", "t1", "t2"][: rng.randint(1, 3)]
    indep = [(a, b) for i, a in enumerate(topics) for b in topics[i + 1 :] if rng.random() < 0.5]
    universe = TopicUniverse.of(topics, indep)
    return Security(lattice, universe, ReadingPolicy({}, lattice.top))


def _random_sort(rng: random.Random, sec: Security) -> AnnotatedSort:
    levels = sec.lattice.levels
    # bias towards the bottom so that leak-free protocols are common
    level = sec.lattice.bottom if rng.random() < 0.45 else rng.choice(levels)
    return AnnotatedSort(rng.choice(SORTS), level, rng.choice(sec.universe.topics))


def _random_global(rng, sec, parts, depth, leaf) -> GlobalType:
    if depth <= 0 or rng.random() < 0.12:
        return leaf
    p, q = rng.sample(parts, 2)
    k = 1 if depth < 2 or rng.random() < 0.6 else 2
    labels = rng.sample(LABELS, k)
    if k == 1:
        cont = _random_global(rng, sec, parts, depth - 1, leaf)
        return Comm(p, q, (Branch(labels[0], _random_sort(rng, sec), cont),))
    # Branches differ only in what p and q do, then share a tail, so that
    # every other participant projects identically.
    tail = _random_global(rng, sec, parts, depth - 2, leaf)
    branches = []
    for label in labels:
        cont = _random_global(rng, sec, [p, q], rng.randint(0, 1), tail)
        branches.append(Branch(label, _random_sort(rng, sec), cont))
    return Comm(p, q, tuple(branches))


def random_global(rng: random.Random, sec: Security, parts: list[str], depth: int) -> GlobalType:
    if rng.random() < 0.3:
        body = _random_global(rng, sec, parts, depth, TVar("t"))
        if isinstance(body, Comm):
            return TRec("t", body)
    return _random_global(rng, sec, parts, depth, END)


def _expr_for(rng: random.Random, s: AnnotatedSort, scope: dict[str, AnnotatedSort], sec: Security):
    usable = [x for x, t in scope.items() if t == s]
    if usable and rng.random() < 0.5:
        return Var(rng.choice(usable))
    payload = {"nat": rng.randint(0, 9), "int": rng.randint(-9, 9), "bool": rng.random() < 0.5, "str": f"s{rng.randint(0, 9)}"}[s.sort]
    lit = Lit(Value(payload, s.sort, s.level, s.topic))
    if s.sort in ("nat", "int", "str") and rng.random() < 0.3:
        op = "++" if s.sort == "str" else "+"
        other = {"nat": 1, "int": 1, "str": "x"}[s.sort]
        low = Lit(Value(other, s.sort, sec.lattice.bottom, s.topic))
        return BinOp(op, low, lit) if rng.random() < 0.5 else BinOp(op, lit, low)
    return lit


def implement(rng: random.Random, t: SessionType, sec: Security, scope=None, counter=None) -> Process:
    """A random process whose type is a subtype of ``t``."""
    scope = scope or {}
    counter = counter if counter is not None else [0]
    match t:
        case End():
            return INACT
        case TVar(name):
            return PVar("X" + name)
        case TRec(name, body):
            return Rec("X" + name, implement(rng, body, sec, scope, counter))
        case Out(q, bs):
            chosen = [b for b in bs if rng.random() < 0.75] or [rng.choice(bs)]
            return int_choice(
                *(Output(q, b.label, _expr_for(rng, b.sort, scope, sec), implement(rng, b.cont, sec, scope, counter)) for b in chosen)
            )
        case In(p, bs):
            branches = []
            for b in bs:
                counter[0] += 1
                x = f"x{counter[0]}"
                branches.append(Input(p, b.label, x, b.sort, implement(rng, b.cont, sec, {**scope, x: b.sort}, counter)))
            if rng.random() < 0.2:
                counter[0] += 1
                extra = AnnotatedSort("nat", sec.lattice.bottom, rng.choice(sec.universe.topics))
                branches.append(Input(p, "z", f"x{counter[0]}", extra, INACT))
            rng.shuffle(branches)
            return ext_choice(*branches)
    raise TypeError(t)


def random_instance(rng: random.Random, max_parts: int = 5, max_depth: int = 5) -> Instance:
    """A session implementing a random projectable global type.

    The reading policy and topic independence are random, so some instances
    are deliberately not typable.
    """
    sec = random_security(rng)
    parts = [f"p{i}" for i in range(rng.randint(2, max_parts))]
    for _ in range(50):
        g = random_global(rng, sec, parts, rng.randint(1, max_depth))
        try:
            projections = {p: project(g, p) for p in parts}
            break
        except NotProjectable:
            continue
    else:
        g = END
        projections = {p: END for p in parts}
    # Reading levels: mostly generous, occasionally too strict.
    entries = {}
    for p in parts:
        for topic in sec.universe.topics:
            if rng.random() < 0.2:
                entries[p, topic] = rng.choice(sec.lattice.levels)
    policy = ReadingPolicy(entries, sec.lattice.top if rng.random() < 0.85 else sec.lattice.bottom)
    sec = Security(sec.lattice, sec.universe, policy)
    comps = [(p, implement(rng, projections[p], sec)) for p in parts]
    if len(parts) < max_parts and rng.random() < 0.2:
        comps.append((f"p{len(parts)}", INACT))
    rng.shuffle(comps)
    return Instance(Session(tuple(comps)), g, sec)


@dataclass
class SuiteResult:
    instances: int = 0
    typable: int = 0
    soundness_failures: list = field(default_factory=list)
    sr_failures: list = field(default_factory=list)
    untypable_with_violation: int = 0

    @property
    def passed(self) -> bool:
        return not self.soundness_failures and not self.sr_failures


def run_theorem_suite(count: int, seed: int = 0, depth: int = 6, steps: int = 5) -> SuiteResult:
    rng = random.Random(seed)
    result = SuiteResult()
    for _ in range(count):
        inst = random_instance(rng)
        result.instances += 1
        n, g, sec = inst.session, inst.global_type, inst.security
        sound = soundness_property(n, g, sec, depth)
        if sound.vacuous:
            if not check_safe_session(n, min(depth, 4), sec).safe:
                result.untypable_with_violation += 1
            continue
        result.typable += 1
        if not sound.passed:
            result.soundness_failures.append((inst, sound))
        sr = subject_reduction_property(n, g, sec, steps)
        if not sr.passed:
            result.sr_failures.append((inst, sr))
    return result


def describe(inst: Instance) -> str:
    return f"session {inst.session}\nglobal {inst.global_type}\n{inst.security}"
