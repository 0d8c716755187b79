"""Hypothesis strategies and small independent reference implementations."""

from __future__ import annotations

from collections import Counter

from hypothesis import strategies as st

from topicsessions.calculus import (
    INACT,
    AnnotatedSort,
    ExtChoice,
    Input,
    IntChoice,
    Lit,
    Output,
    PVar,
    Rec,
    Session,
    Value,
    Var,
)
from topicsessions.security import ReadingPolicy, Security, TopicUniverse, chain, validate_lattice
from topicsessions.session_types import END, Branch, Comm, End, In, Out, TRec, TVar

PARTS = ("p", "q", "r", "s")
LABELS = ("a", "b", "c")

# Every lattice with at most six elements that the laws are checked on.
LATTICE_ZOO = {
    "chain1": lambda: chain("bot"),
    "chain2": lambda: chain("bot", "top"),
    "chain3": lambda: chain("bot", "mid", "top"),
    "chain6": lambda: chain(*"abcdef"),
    "diamond": lambda: validate_lattice(
        ["bot", "a", "b", "top"], [("bot", "a"), ("bot", "b"), ("a", "top"), ("b", "top")]
    ),
    "M3": lambda: validate_lattice(
        ["0", "x", "y", "z", "1"], [("0", "x"), ("0", "y"), ("0", "z"), ("x", "1"), ("y", "1"), ("z", "1")]
    ),
    "N5": lambda: validate_lattice(
        ["0", "a", "b", "c", "1"], [("0", "a"), ("a", "b"), ("b", "1"), ("0", "c"), ("c", "1")]
    ),
    "2x3": lambda: validate_lattice(
        ["00", "01", "02", "10", "11", "12"],
        [("00", "01"), ("01", "02"), ("10", "11"), ("11", "12"), ("00", "10"), ("01", "11"), ("02", "12")],
    ),
}

DIAMOND = LATTICE_ZOO["diamond"]()


def security(lattice=DIAMOND, topics=("phi", "psi"), indep=(("phi", "psi"),), entries=None, default=None):
    return Security(
        lattice,
        TopicUniverse.of(topics, indep),
        ReadingPolicy(entries or {}, default if default is not None else lattice.top),
    )


# -- security settings ---------------------------------------------------------------


@st.composite
def securities(draw, lattice=DIAMOND, topics=("phi", "psi", "chi")):
    pairs = [(a, b) for i, a in enumerate(topics) for b in topics[i + 1 :]]
    indep = [pr for pr in pairs if draw(st.booleans())]
    entries = {}
    for p in PARTS:
        for t in topics:
            if draw(st.integers(0, 3)) == 0:
                entries[p, t] = draw(st.sampled_from(lattice.levels))
    default = draw(st.sampled_from([lattice.top, lattice.top, lattice.bottom]))
    return Security(lattice, TopicUniverse.of(topics, indep), ReadingPolicy(entries, default))


def annotated_sorts(lattice=DIAMOND, topics=("phi", "psi", "chi"), sorts=("nat", "bool")):
    return st.builds(
        AnnotatedSort, st.sampled_from(sorts), st.sampled_from(lattice.levels), st.sampled_from(topics)
    )


# -- session types ------------------------------------------------------------------------


@st.composite
def session_types(draw, depth=4, bound=(), sorts=None, guarded=False):
    """Closed, well-formed session types; ``rec`` bodies start with a prefix."""
    sorts = annotated_sorts() if sorts is None else sorts
    choices = ["end", "io", "io"]
    if bound and guarded:
        choices.append("var")
    if depth > 0 and len(bound) < 2:
        choices.append("rec")
    if depth <= 0:
        choices = ["end", "var"] if bound and guarded else ["end"]
    kind = draw(st.sampled_from(choices))
    match kind:
        case "end":
            return END
        case "var":
            return TVar(draw(st.sampled_from(bound)))
        case "rec":
            name = f"t{len(bound)}"
            body = draw(_prefix_type(depth - 1, bound + (name,), sorts))
            return TRec(name, body)
    return draw(_prefix_type(depth - 1, bound, sorts))


@st.composite
def _prefix_type(draw, depth, bound, sorts):
    node = draw(st.sampled_from([Out, In]))
    peer = draw(st.sampled_from(PARTS))
    labels = draw(st.lists(st.sampled_from(LABELS), min_size=1, max_size=2, unique=True))
    branches = tuple(
        Branch(l, draw(sorts), draw(session_types(depth, bound, sorts, guarded=True))) for l in labels
    )
    return node(peer, branches)


@st.composite
def subtypes_of(draw, t):
    """A subtype of ``t``: fewer output branches, more input branches."""
    match t:
        case TRec(v, body):
            return TRec(v, draw(subtypes_of(body)))
        case Out(q, bs):
            keep = draw(st.lists(st.sampled_from(range(len(bs))), min_size=1, unique=True))
            return Out(q, tuple(_sub_branch(draw, bs[i]) for i in sorted(keep)))
        case In(p, bs):
            kept = [_sub_branch(draw, b) for b in bs]
            used = {b.label for b in bs}
            spare = [l for l in LABELS + ("d",) if l not in used]
            if spare and draw(st.booleans()):
                kept.append(Branch(spare[0], draw(annotated_sorts()), END))
            return In(p, tuple(kept))
    return t


def _sub_branch(draw, b):
    return Branch(b.label, b.sort, draw(subtypes_of(b.cont)))


# -- global types ----------------------------------------------------------------------------


@st.composite
def global_types(draw, depth=4, bound=(), parts=PARTS):
    choices = ["end", "comm", "comm"]
    if bound:
        choices.append("var")
    if depth > 0 and not bound:
        choices.append("rec")
    if depth <= 0:
        choices = ["var"] if bound else ["end"]
    kind = draw(st.sampled_from(choices))
    match kind:
        case "end":
            return END
        case "var":
            return TVar(draw(st.sampled_from(bound)))
        case "rec":
            return TRec("t", draw(_comm(depth - 1, ("t",), parts)))
    return draw(_comm(depth - 1, bound, parts))


@st.composite
def _comm(draw, depth, bound, parts):
    p, q = draw(st.lists(st.sampled_from(parts), min_size=2, max_size=2, unique=True))
    labels = draw(st.lists(st.sampled_from(LABELS), min_size=1, max_size=2, unique=True))
    return Comm(
        p,
        q,
        tuple(Branch(l, draw(annotated_sorts()), draw(global_types(depth, bound, parts))) for l in labels),
    )


# -- processes ----------------------------------------------------------------------------------


def literal(s: AnnotatedSort) -> Lit:
    payload = {"nat": 1, "int": -1, "bool": True, "str": "v"}[s.sort]
    return Lit(Value(payload, s.sort, s.level, s.topic))


@st.composite
def processes(draw, depth=3, pvars=(), scope=None, sorts=None, peer=None):
    """Closed, annotated processes (free expression variables drawn from ``scope``).

    ``peer`` fixes the partner of a leading prefix, so that the branches of a
    choice mostly address one participant.
    """
    sorts = annotated_sorts() if sorts is None else sorts
    scope = scope or {}
    options = ["end", "out", "in", "in"]
    if depth > 0:
        options += ["int", "ext", "rec"]
    if pvars:
        options.append("var")
    if depth <= 0:
        options = ["end"] + (["var"] if pvars else [])
    kind = draw(st.sampled_from(options))
    peer = peer or draw(st.sampled_from(PARTS[1:]))
    label = draw(st.sampled_from(LABELS))
    match kind:
        case "end":
            return INACT
        case "var":
            return PVar(draw(st.sampled_from(pvars)))
        case "out":
            usable = sorted(scope)
            if usable and draw(st.booleans()):
                e = Var(draw(st.sampled_from(usable)))
            else:
                e = literal(draw(sorts))
            return Output(peer, label, e, draw(processes(depth - 1, pvars, scope, sorts)))
        case "in":
            x = f"x{depth}"
            s = draw(sorts)
            return Input(peer, label, x, s, draw(processes(depth - 1, pvars, {**scope, x: s}, sorts)))
        case "int" | "ext":
            node = IntChoice if kind == "int" else ExtChoice
            guarded_kind = "out" if kind == "int" else "in"
            left = draw(_prefixed(guarded_kind, depth - 1, pvars, scope, sorts, peer))
            right = draw(_prefixed(guarded_kind, depth - 1, pvars, scope, sorts, peer))
            return node(left, right)
        case "rec":
            name = f"X{len(pvars)}"
            body = draw(_prefixed(draw(st.sampled_from(["out", "in"])), depth - 1, pvars + (name,), scope, sorts))
            return Rec(name, body)
    raise AssertionError(kind)


@st.composite
def _prefixed(draw, kind, depth, pvars, scope, sorts, peer=None):
    p = draw(processes(max(depth, 1), pvars, scope, sorts, peer))
    if isinstance(p, (Output, IntChoice) if kind == "out" else (Input, ExtChoice)):
        return p
    peer = peer or draw(st.sampled_from(PARTS[1:]))
    label = draw(st.sampled_from(LABELS))
    s = draw(sorts)
    cont = draw(processes(depth - 1, pvars, scope, sorts))
    if kind == "out":
        return Output(peer, label, literal(s), cont)
    return Input(peer, label, f"y{depth}", s, cont)


# -- reference implementations ------------------------------------------------------------------------


def congruence_signature(p):
    """A multiset view of a process: choices become bags of their operands."""
    match p:
        case IntChoice() | ExtChoice():
            node = type(p)
            bag = Counter()
            stack = [p]
            while stack:
                cur = stack.pop()
                if isinstance(cur, node):
                    stack += [cur.left, cur.right]
                else:
                    bag[congruence_signature(cur)] += 1
            return (node.__name__, frozenset(bag.items()))
        case Output(peer, label, e, cont):
            return ("out", peer, label, str(e), congruence_signature(cont))
        case Input(peer, label, x, s, cont):
            return ("in", peer, label, x, s, congruence_signature(cont))
        case Rec(x, body):
            return ("rec", x, congruence_signature(body))
    return ("leaf", str(p))


def session_signature(n: Session):
    return Counter((who, congruence_signature(p)) for who, p in n if p != INACT)


def _unroll(t):
    seen = 0
    while isinstance(t, TRec):
        t = _subst(t.body, t.var, t)
        seen += 1
        assert seen < 50
    return t


def _subst(t, name, s):
    match t:
        case TVar(n) if n == name:
            return s
        case TRec(v, body) if v != name:
            return TRec(v, _subst(body, name, s))
        case Out(q, bs):
            return Out(q, tuple(Branch(b.label, b.sort, _subst(b.cont, name, s)) for b in bs))
        case In(q, bs):
            return In(q, tuple(Branch(b.label, b.sort, _subst(b.cont, name, s)) for b in bs))
    return t


def nodes(t) -> set:
    """Unfolded nodes reachable from ``t`` (test-side traversal)."""
    seen, todo = set(), [_unroll(t)]
    while todo:
        n = todo.pop()
        if n in seen:
            continue
        seen.add(n)
        if isinstance(n, (Out, In)):
            todo += [_unroll(b.cont) for b in n.branches]
    return seen


def subtype_upto(a, b, k: int) -> bool:
    """k-step approximation of the coinductive subtype relation."""
    if k == 0:
        return True
    a, b = _unroll(a), _unroll(b)
    match a, b:
        case End(), End():
            return True
        case In(p, bs1), In(q, bs2) if p == q:
            m = {x.label: x for x in bs1}
            return all(
                y.label in m and m[y.label].sort == y.sort and subtype_upto(m[y.label].cont, y.cont, k - 1)
                for y in bs2
            )
        case Out(p, bs1), Out(q, bs2) if p == q:
            m = {y.label: y for y in bs2}
            return all(
                x.label in m and m[x.label].sort == x.sort and subtype_upto(x.cont, m[x.label].cont, k - 1)
                for x in bs1
            )
    return False


def reference_subtype(a, b) -> bool:
    # For finite-state types the approximation stabilises after |states1|*|states2| steps.
    return subtype_upto(a, b, len(nodes(a)) * len(nodes(b)) + 1)


def reference_agrees(level, topic, t, sec) -> bool:
    return all(
        sec.leq(level, b.sort.level) or sec.independent(topic, b.sort.topic)
        for n in nodes(t)
        if isinstance(n, Out)
        for b in n.branches
    )


def reference_safe(t, sec) -> bool:
    for n in nodes(t):
        match n:
            case Out(q, bs):
                if not all(sec.leq(b.sort.level, sec.reading_level(q, b.sort.topic)) for b in bs):
                    return False
            case In(_, bs):
                if not all(reference_agrees(b.sort.level, b.sort.topic, b.cont, sec) for b in bs):
                    return False
    return True
