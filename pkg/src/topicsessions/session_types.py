"""Session types, global types and the coinductive relations over them.

Recursive types are equi-recursive: ``rec t . T`` is identified with its
unfolding. Every coinductive check below unfolds on demand and keeps a set
of visited (unfolded) nodes; meeting a visited node again closes the cycle
successfully.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .calculus import AnnotatedSort
from .errors import (
    DuplicateLabel,
    FreeTypeVariable,
    LabelNotOffered,
    NotProjectable,
    ResidualUndefined,
    SelfCommunication,
    SortOrAnnotationMismatch,
    TypeMismatch,
    Unguarded,
)
from .security import Level, Participant, Security, Topic


@dataclass(frozen=True)
class Branch:
    label: str
    sort: AnnotatedSort
    cont: "AnyType"

    def __str__(self):
        return f"{self.label}({self.sort}).{self.cont}"


@dataclass(frozen=True)
class Out:
    """Union of outputs towards ``peer``."""

    peer: Participant
    branches: tuple[Branch, ...]

    def __str__(self):
        return _show_branches(f"{self.peer}!", self.branches)


@dataclass(frozen=True)
class In:
    """Intersection of inputs from ``peer``."""

    peer: Participant
    branches: tuple[Branch, ...]

    def __str__(self):
        return _show_branches(f"{self.peer}?", self.branches)


@dataclass(frozen=True)
class Comm:
    sender: Participant
    receiver: Participant
    branches: tuple[Branch, ...]

    def __str__(self):
        head = f"{self.sender} -> {self.receiver} : "
        if len(self.branches) == 1:
            b = self.branches[0]
            return f"{head}{b.label}({b.sort}) . {b.cont}"
        inner = ", ".join(f"{b.label}({b.sort}) . {b.cont}" for b in self.branches)
        return f"{head}{{{inner}}}"


@dataclass(frozen=True)
class TRec:
    var: str
    body: "AnyType"

    def __str__(self):
        return f"rec {self.var} . {self.body}"


@dataclass(frozen=True)
class TVar:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class End:
    def __str__(self):
        return "end"


END = End()

SessionType = Union[Out, In, TRec, TVar, End]
GlobalType = Union[Comm, TRec, TVar, End]
AnyType = Union[Out, In, Comm, TRec, TVar, End]


def _show_branches(prefix: str, branches) -> str:
    if len(branches) == 1:
        return f"{prefix}{branches[0]}"
    return f"{prefix}{{{', '.join(str(b) for b in branches)}}}"


def out(peer, label, sort, cont=END) -> Out:
    return Out(peer, (Branch(label, sort, cont),))


def inp(peer, label, sort, cont=END) -> In:
    return In(peer, (Branch(label, sort, cont),))


def comm(sender, receiver, label, sort, cont=END) -> Comm:
    return Comm(sender, receiver, (Branch(label, sort, cont),))


# -- structure ------------------------------------------------------------------------


def _children(t: AnyType):
    match t:
        case Out(_, bs) | In(_, bs) | Comm(_, _, bs):
            return [b.cont for b in bs]
        case TRec(_, body):
            return [body]
    return []


def subst_tvar(t: AnyType, name: str, s: AnyType) -> AnyType:
    match t:
        case TVar(n):
            return s if n == name else t
        case TRec(v, body):
            return t if v == name else TRec(v, subst_tvar(body, name, s))
        case Out(peer, bs):
            return Out(peer, _subst_branches(bs, name, s))
        case In(peer, bs):
            return In(peer, _subst_branches(bs, name, s))
        case Comm(p, q, bs):
            return Comm(p, q, _subst_branches(bs, name, s))
    return t


def _subst_branches(bs, name, s):
    return tuple(Branch(b.label, b.sort, subst_tvar(b.cont, name, s)) for b in bs)


def unfold_type(t: AnyType) -> AnyType:
    """Strip leading ``rec`` binders by unfolding them."""
    seen = set()
    while isinstance(t, TRec):
        if t in seen:
            raise Unguarded(f"unguarded recursion in {t}")
        seen.add(t)
        t = subst_tvar(t.body, t.var, t)
    return t


def free_tvars(t: AnyType) -> set[str]:
    match t:
        case TVar(n):
            return {n}
        case TRec(v, body):
            return free_tvars(body) - {v}
    return set().union(*(free_tvars(c) for c in _children(t))) if _children(t) else set()


def _unguarded_tvars(t: AnyType) -> set[str]:
    match t:
        case TVar(n):
            return {n}
        case TRec(v, body):
            return _unguarded_tvars(body) - {v}
    return set()


def _wf(t: AnyType, kinds: tuple[type, ...]) -> None:
    if not isinstance(t, kinds + (TRec, TVar, End)):
        raise TypeError(f"unexpected node {t!r}")
    match t:
        case TRec(v, body):
            if v in _unguarded_tvars(body):
                raise Unguarded(f"type variable {v} is not guarded in {t}")
        case Out(_, bs) | In(_, bs) | Comm(_, _, bs):
            if not bs:
                raise TypeMismatch(f"empty choice in {t}")
            labels = [b.label for b in bs]
            dup = {l for l in labels if labels.count(l) > 1}
            if dup:
                raise DuplicateLabel(f"label(s) {sorted(dup)} repeated in {t}")
            if isinstance(t, Comm) and t.sender == t.receiver:
                raise SelfCommunication(f"{t.sender} communicates with itself")
    for c in _children(t):
        _wf(c, kinds)


def wf_session_type(t: SessionType) -> None:
    """Raise if ``t`` has duplicate labels, unguarded or free type variables."""
    _wf(t, (Out, In))
    if free_tvars(t):
        raise FreeTypeVariable(f"free type variable(s) {sorted(free_tvars(t))} in {t}")


def wf_global_type(g: GlobalType) -> None:
    _wf(g, (Comm,))
    if free_tvars(g):
        raise FreeTypeVariable(f"free type variable(s) {sorted(free_tvars(g))} in {g}")


def reachable(t: AnyType) -> set[AnyType]:
    """The unfolded nodes reachable from ``t``; finite for guarded types."""
    seen: set[AnyType] = set()
    todo = [unfold_type(t)]
    while todo:
        node = todo.pop()
        if node in seen:
            continue
        seen.add(node)
        todo.extend(unfold_type(c) for c in _children(node))
    return seen


def canonical(t: AnyType) -> AnyType:
    """Sort branches by label and rename bound variables by binding depth."""
    return _canon(t, {}, 0)


def _canon(t, env, depth):
    match t:
        case TVar(n):
            return TVar(env.get(n, n))
        case TRec(v, body):
            fresh = f"%{depth}"
            return TRec(fresh, _canon(body, {**env, v: fresh}, depth + 1))
        case Out(peer, bs):
            return Out(peer, _canon_branches(bs, env, depth))
        case In(peer, bs):
            return In(peer, _canon_branches(bs, env, depth))
        case Comm(p, q, bs):
            return Comm(p, q, _canon_branches(bs, env, depth))
    return t


def _canon_branches(bs, env, depth):
    return tuple(sorted((Branch(b.label, b.sort, _canon(b.cont, env, depth)) for b in bs), key=lambda b: b.label))


# -- subtyping ----------------------------------------------------------------------------


Failure = tuple[tuple[str, ...], type, str]


def subtype_failure(t1: SessionType, t2: SessionType, visited: set | None = None) -> Failure | None:
    """``None`` when ``t1 ≤ t2``; otherwise where and why the check failed.

    Free type variables are compared as atoms.
    """
    visited = set() if visited is None else visited
    return _sub(t1, t2, visited, ())


def _sub(a, b, visited, path) -> Failure | None:
    a, b = unfold_type(a), unfold_type(b)
    if (a, b) in visited:
        return None
    visited.add((a, b))
    match a, b:
        case End(), End():
            return None
        case TVar(x), TVar(y) if x == y:
            return None
        case In(p, bs1), In(q, bs2) if p == q:
            mine = {br.label: br for br in bs1}
            for br in bs2:
                here = path + (f"{p}?{br.label}",)
                got = mine.get(br.label)
                if got is None:
                    return here, LabelNotOffered, f"input {p}?{br.label} expected but not offered"
                if got.sort != br.sort:
                    return here, SortOrAnnotationMismatch, f"input carries {got.sort}, expected {br.sort}"
                fail = _sub(got.cont, br.cont, visited, here)
                if fail:
                    return fail
            return None
        case Out(p, bs1), Out(q, bs2) if p == q:
            theirs = {br.label: br for br in bs2}
            for br in bs1:
                here = path + (f"{p}!{br.label}",)
                want = theirs.get(br.label)
                if want is None:
                    return here, LabelNotOffered, f"output {p}!{br.label} is not allowed here"
                if want.sort != br.sort:
                    return here, SortOrAnnotationMismatch, f"output carries {br.sort}, expected {want.sort}"
                fail = _sub(br.cont, want.cont, visited, here)
                if fail:
                    return fail
            return None
    return path, TypeMismatch, f"{_head(a)} does not match expected {_head(b)}"


def _head(t) -> str:
    match t:
        case Out(p, bs):
            return f"output to {p} ({', '.join(b.label for b in bs)})"
        case In(p, bs):
            return f"input from {p} ({', '.join(b.label for b in bs)})"
    return str(t)


def subtype(t1: SessionType, t2: SessionType, visited: set | None = None) -> bool:
    return subtype_failure(t1, t2, visited) is None


def type_equiv(t1: AnyType, t2: AnyType) -> bool:
    """Equality of infinite unfoldings, up to branch order."""
    if isinstance(unfold_type(t1), Comm) or isinstance(unfold_type(t2), Comm):
        return _global_equiv(t1, t2, set())
    return subtype(t1, t2) and subtype(t2, t1)


def _global_equiv(a, b, visited) -> bool:
    a, b = unfold_type(a), unfold_type(b)
    if (a, b) in visited:
        return True
    visited.add((a, b))
    match a, b:
        case End(), End():
            return True
        case TVar(x), TVar(y):
            return x == y
        case Comm(p, q, bs1), Comm(r, s, bs2) if (p, q) == (r, s):
            m1 = {br.label: br for br in bs1}
            m2 = {br.label: br for br in bs2}
            if m1.keys() != m2.keys():
                return False
            return all(
                m1[l].sort == m2[l].sort and _global_equiv(m1[l].cont, m2[l].cont, visited) for l in m1
            )
    return False


# -- agreement and safety -------------------------------------------------------------------


def agreement_failure(level: Level, topic: Topic, t: SessionType, sec: Security, visited=None) -> str | None:
    visited = set() if visited is None else visited
    return _agree(level, topic, t, sec, visited, ())


def _agree(level, topic, t, sec, visited, path) -> str | None:
    t = unfold_type(t)
    if t in visited:
        return None
    visited.add(t)
    match t:
        case End():
            return None
        case Out(q, bs):
            for b in bs:
                here = path + (f"{q}!{b.label}",)
                if not (sec.leq(level, b.sort.level) or sec.independent(topic, b.sort.topic)):
                    return (
                        f"output {q}!{b.label}({b.sort}) at {'/'.join(here)} drops {level} to "
                        f"{b.sort.level} on topic {b.sort.topic}, related to {topic}"
                    )
                fail = _agree(level, topic, b.cont, sec, visited, here)
                if fail:
                    return fail
            return None
        case In(p, bs):
            for b in bs:
                fail = _agree(level, topic, b.cont, sec, visited, path + (f"{p}?{b.label}",))
                if fail:
                    return fail
            return None
        case TVar(n):
            raise FreeTypeVariable(f"free type variable {n}")
    raise TypeError(f"not a session type: {t!r}")


def agrees(level: Level, topic: Topic, t: SessionType, sec: Security, visited=None) -> bool:
    """``⟨level, topic⟩`` agrees with ``t``: every reachable output keeps the level
    or is on an independent topic."""
    return agreement_failure(level, topic, t, sec, visited) is None


def unsafe_reason(t: SessionType, sec: Security, visited=None) -> str | None:
    visited = set() if visited is None else visited
    return _safe(t, sec, visited, {}, ())


def _safe(t, sec, visited, agree_memo, path) -> str | None:
    t = unfold_type(t)
    if t in visited:
        return None
    visited.add(t)
    match t:
        case End():
            return None
        case Out(q, bs):
            for b in bs:
                here = path + (f"{q}!{b.label}",)
                bound = sec.reading_level(q, b.sort.topic)
                if not sec.leq(b.sort.level, bound):
                    return (
                        f"safe-out fails at {'/'.join(here)}: {b.sort.level} is not below "
                        f"rho({q},{b.sort.topic}) = {bound}"
                    )
                fail = _safe(b.cont, sec, visited, agree_memo, here)
                if fail:
                    return fail
            return None
        case In(p, bs):
            for b in bs:
                here = path + (f"{p}?{b.label}",)
                fail = _safe(b.cont, sec, visited, agree_memo, here)
                if fail:
                    return fail
                key = (b.sort.level, b.sort.topic, b.cont)
                if key not in agree_memo:
                    agree_memo[key] = agreement_failure(b.sort.level, b.sort.topic, b.cont, sec)
                if agree_memo[key]:
                    return f"safe-in fails at {'/'.join(here)}: <{b.sort.level},{b.sort.topic}> does not agree: {agree_memo[key]}"
            return None
        case TVar(n):
            raise FreeTypeVariable(f"free type variable {n}")
    raise TypeError(f"not a session type: {t!r}")


def safe_type(t: SessionType, sec: Security) -> bool:
    return unsafe_reason(t, sec) is None


# -- global types ------------------------------------------------------------------------------


def participants(g: GlobalType) -> set[Participant]:
    match g:
        case Comm(p, q, bs):
            return {p, q}.union(*(participants(b.cont) for b in bs))
        case TRec(_, body):
            return participants(body)
    return set()


def project(g: GlobalType, r: Participant) -> SessionType:
    match g:
        case Comm(p, q, bs) if r == p:
            return Out(q, tuple(Branch(b.label, b.sort, project(b.cont, r)) for b in bs))
        case Comm(p, q, bs) if r == q:
            return In(p, tuple(Branch(b.label, b.sort, project(b.cont, r)) for b in bs))
        case Comm(p, q, bs):
            projections = [project(b.cont, r) for b in bs]
            first = canonical(projections[0])
            for b, other in zip(bs[1:], projections[1:]):
                if canonical(other) != first:
                    raise NotProjectable(
                        f"{r} sees {projections[0]} after {p}->{q}:{bs[0].label} "
                        f"but {other} after {p}->{q}:{b.label}"
                    )
            return projections[0]
        case TRec(t, body):
            if r not in participants(body):
                return END
            result = TRec(t, project(body, r))
            if t in _unguarded_tvars(result.body):
                raise NotProjectable(f"projection of {g} onto {r} is the unguarded {result}")
            return result
    return g


def residual(g: GlobalType, p: Participant, label: str, q: Participant) -> GlobalType:
    """The global type left after ``p`` sends ``label`` to ``q``."""
    return _residual(g, p, label, q, frozenset())


def _residual(g, p, label, q, seen):
    match g:
        case Comm(r, s, bs) if (r, s) == (p, q):
            for b in bs:
                if b.label == label:
                    return b.cont
            raise ResidualUndefined(f"{p}->{q} offers no label {label}")
        case Comm(r, s, bs):
            if {r, s} & {p, q}:
                raise ResidualUndefined(f"{r}->{s} precedes {p}->{q}:{label}")
            return Comm(r, s, tuple(Branch(b.label, b.sort, _residual(b.cont, p, label, q, seen)) for b in bs))
        case TRec():
            if g in seen:
                raise ResidualUndefined(f"{p}->{q}:{label} never occurs on a cycle of {g}")
            return _residual(unfold_type_once(g), p, label, q, seen | {g})
    raise ResidualUndefined(f"{p}->{q}:{label} does not occur in {g}")


def unfold_type_once(t: TRec) -> AnyType:
    return subst_tvar(t.body, t.var, t)


def reduce_type(t: SessionType) -> set[SessionType]:
    """One-step reducts: a single summand of a union, or any branch continuation."""
    t = unfold_type(t)
    match t:
        case Out(q, bs):
            result = {b.cont for b in bs}
            if len(bs) > 1:
                result |= {Out(q, (b,)) for b in bs}
            return result
        case In(_, bs):
            return {b.cont for b in bs}
    return set()


def reduce_type_star(t: SessionType, steps: int) -> set[SessionType]:
    reached = {t}
    frontier = {t}
    for _ in range(steps):
        frontier = {r for f in frontier for r in reduce_type(f)} - reached
        reached |= frontier
    return reached


def _comm_labels(g) -> set[tuple[Participant, str, Participant]]:
    found = set()
    match g:
        case Comm(p, q, bs):
            for b in bs:
                found.add((p, b.label, q))
    for c in _children(g):
        found |= _comm_labels(c)
    return found


def reduce_global(g: GlobalType) -> set[tuple[Participant, str, Participant, GlobalType]]:
    result = set()
    for p, label, q in _comm_labels(g):
        try:
            result.add((p, label, q, residual(g, p, label, q)))
        except ResidualUndefined:
            pass
    return result
