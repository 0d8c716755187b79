"""Processes, sessions and their labelled transition systems.

Every AST node is a frozen dataclass, so terms hash structurally and can be
collected in sets. ``str()`` of any node prints the concrete syntax accepted
by :mod:`topicsessions.syntax`.
"""

from __future__ import annotations

import json
import operator
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Union

from .errors import FreeVariable, MixedTopics, NotARecursion, SortMismatch, Unguarded
from .security import Lattice, Level, Participant, Topic

SORTS = ("nat", "int", "bool", "str")


# -- values and expressions ------------------------------------------------------


@dataclass(frozen=True)
class AnnotatedSort:
    sort: str
    level: Level
    topic: Topic

    def __str__(self):
        return f"{self.sort}^{{{self.level},{self.topic}}}"


@dataclass(frozen=True)
class Value:
    payload: int | bool | str
    sort: str
    level: Level
    topic: Topic

    def __post_init__(self):
        ok = {
            "nat": lambda v: type(v) is int and v >= 0,
            "int": lambda v: type(v) is int,
            "bool": lambda v: type(v) is bool,
            "str": lambda v: type(v) is str,
        }.get(self.sort)
        if ok is None or not ok(self.payload):
            raise SortMismatch(f"payload {self.payload!r} is not of sort {self.sort}")

    @property
    def annotation(self) -> AnnotatedSort:
        return AnnotatedSort(self.sort, self.level, self.topic)

    def show_payload(self) -> str:
        match self.sort:
            case "nat":
                return str(self.payload)
            case "int":
                return f"{self.payload:+d}"
            case "bool":
                return "true" if self.payload else "false"
            case _:
                return json.dumps(self.payload)

    def __str__(self):
        return f"{self.show_payload()}^{{{self.level},{self.topic}}}"


def value_of(payload, level: Level, topic: Topic, sort: str | None = None) -> Value:
    """Build a value, guessing the sort from the payload when not given."""
    if sort is None:
        if isinstance(payload, bool):
            sort = "bool"
        elif isinstance(payload, int):
            sort = "nat" if payload >= 0 else "int"
        else:
            sort = "str"
    return Value(payload, sort, level, topic)


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Lit:
    value: Value

    def __str__(self):
        return str(self.value)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"

    def __str__(self):
        def side(e):
            if isinstance(e, BinOp) or (isinstance(e, UnOp) and e.op == "not"):
                return f"({e})"
            return str(e)

        return f"{side(self.left)} {self.op} {side(self.right)}"


@dataclass(frozen=True)
class UnOp:
    op: str
    arg: "Expr"

    def __str__(self):
        if self.op == "not":
            return f"not ({self.arg})"
        return f"{self.op}({self.arg})"


Expr = Union[Var, Lit, BinOp, UnOp]

_ARITH = {("nat", "nat"): "nat", ("int", "int"): "int"}
_CMP = {("nat", "nat"): "bool", ("int", "int"): "bool"}

# operator -> (argument sorts -> result sort, implementation)
BINARY_OPS: dict[str, tuple[dict[tuple[str, str], str], Callable]] = {
    "+": (_ARITH, operator.add),
    "*": (_ARITH, operator.mul),
    "-": ({("nat", "nat"): "int", ("int", "int"): "int"}, operator.sub),
    "<": (_CMP, operator.lt),
    "==": ({**_CMP, ("bool", "bool"): "bool", ("str", "str"): "bool"}, operator.eq),
    "and": ({("bool", "bool"): "bool"}, lambda a, b: a and b),
    "or": ({("bool", "bool"): "bool"}, lambda a, b: a or b),
    "++": ({("str", "str"): "str"}, operator.add),
}

UNARY_OPS: dict[str, tuple[dict[str, str], Callable]] = {
    "not": ({"bool": "bool"}, operator.not_),
    "-": ({"nat": "int", "int": "int"}, operator.neg),
}


def eval_expr(e: Expr, lattice: Lattice) -> Value:
    """Evaluate a closed expression.

    The result carries the join of the levels of all literals and their
    common topic.
    """
    match e:
        case Lit(value):
            lattice._check(value.level)
            return value
        case Var(name):
            raise FreeVariable(f"free variable {name!r} in expression")
        case BinOp(op, left, right):
            a, b = eval_expr(left, lattice), eval_expr(right, lattice)
            if a.topic != b.topic:
                raise MixedTopics(f"operands of {op!r} have topics {a.topic!r} and {b.topic!r}")
            table, fn = BINARY_OPS[op]
            result_sort = table.get((a.sort, b.sort))
            if result_sort is None:
                raise SortMismatch(f"{op!r} is not defined on {a.sort}, {b.sort}")
            return Value(fn(a.payload, b.payload), result_sort, lattice.join(a.level, b.level), a.topic)
        case UnOp(op, arg):
            a = eval_expr(arg, lattice)
            table, fn = UNARY_OPS[op]
            result_sort = table.get(a.sort)
            if result_sort is None:
                raise SortMismatch(f"{op!r} is not defined on {a.sort}")
            return Value(fn(a.payload), result_sort, a.level, a.topic)
    raise TypeError(f"not an expression: {e!r}")


def expr_free_vars(e: Expr) -> set[str]:
    match e:
        case Var(name):
            return {name}
        case Lit():
            return set()
        case BinOp(_, left, right):
            return expr_free_vars(left) | expr_free_vars(right)
        case UnOp(_, arg):
            return expr_free_vars(arg)
    raise TypeError(e)


def subst_expr(e: Expr, x: str, v: Value) -> Expr:
    match e:
        case Var(name) if name == x:
            return Lit(v)
        case BinOp(op, left, right):
            return BinOp(op, subst_expr(left, x, v), subst_expr(right, x, v))
        case UnOp(op, arg):
            return UnOp(op, subst_expr(arg, x, v))
    return e


# -- processes --------------------------------------------------------------------


@dataclass(frozen=True)
class Output:
    peer: Participant
    label: str
    expr: Expr
    cont: "Process"

    def __str__(self):
        return f"{self.peer}!{self.label}({self.expr}).{_prefix_cont(self.cont)}"


@dataclass(frozen=True)
class Input:
    peer: Participant
    label: str
    var: str
    annot: AnnotatedSort | None
    cont: "Process"

    def __str__(self):
        binder = self.var if self.annot is None else f"{self.var}:{self.annot}"
        return f"{self.peer}?{self.label}({binder}).{_prefix_cont(self.cont)}"


@dataclass(frozen=True)
class IntChoice:
    left: "Process"
    right: "Process"

    def __str__(self):
        return _show_choice(self, "(+)")


@dataclass(frozen=True)
class ExtChoice:
    left: "Process"
    right: "Process"

    def __str__(self):
        return _show_choice(self, "+")


@dataclass(frozen=True)
class Rec:
    var: str
    body: "Process"

    def __str__(self):
        return f"rec {self.var} . {self.body}"


@dataclass(frozen=True)
class PVar:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Inact:
    def __str__(self):
        return "end"


INACT = Inact()

Process = Union[Output, Input, IntChoice, ExtChoice, Rec, PVar, Inact]


def _prefix_cont(p: Process) -> str:
    if isinstance(p, (IntChoice, ExtChoice, Rec)):
        return f"({p})"
    return str(p)


def _show_choice(p, sym: str) -> str:
    def operand(q, is_left):
        if isinstance(q, Rec) or (isinstance(q, (IntChoice, ExtChoice)) and (is_left or type(q) is not type(p))):
            return f"({q})"
        return str(q)

    return f"{operand(p.left, True)} {sym} {operand(p.right, False)}"


def int_choice(*branches: Process) -> Process:
    """Right-nested internal choice; a single branch is returned as is."""
    return _nest(IntChoice, branches)


def ext_choice(*branches: Process) -> Process:
    return _nest(ExtChoice, branches)


def _nest(node, branches):
    if not branches:
        raise ValueError("a choice needs at least one branch")
    result = branches[-1]
    for b in reversed(branches[:-1]):
        result = node(b, result)
    return result


def choice_leaves(p: Process, node=None) -> list[Process]:
    """Operands of a (possibly nested) choice of one kind, left to right."""
    node = node or type(p)
    if isinstance(p, node) and node in (IntChoice, ExtChoice):
        return choice_leaves(p.left, node) + choice_leaves(p.right, node)
    return [p]


def free_vars(p: Process) -> set[str]:
    """Free expression variables."""
    match p:
        case Output(_, _, e, cont):
            return expr_free_vars(e) | free_vars(cont)
        case Input(_, _, x, _, cont):
            return free_vars(cont) - {x}
        case IntChoice(l, r) | ExtChoice(l, r):
            return free_vars(l) | free_vars(r)
        case Rec(_, body):
            return free_vars(body)
    return set()


def free_pvars(p: Process) -> set[str]:
    match p:
        case PVar(name):
            return {name}
        case Output(cont=cont) | Input(cont=cont):
            return free_pvars(cont)
        case IntChoice(l, r) | ExtChoice(l, r):
            return free_pvars(l) | free_pvars(r)
        case Rec(x, body):
            return free_pvars(body) - {x}
    return set()


def _unguarded(p: Process) -> set[str]:
    # process variables reachable from p without crossing a prefix
    match p:
        case PVar(name):
            return {name}
        case IntChoice(l, r) | ExtChoice(l, r):
            return _unguarded(l) | _unguarded(r)
        case Rec(x, body):
            return _unguarded(body) - {x}
    return set()


def check_guarded(p: Process) -> None:
    """Raise :class:`Unguarded` if some ``rec X`` reaches ``X`` without a prefix."""
    match p:
        case Rec(x, body):
            if x in _unguarded(body):
                raise Unguarded(f"recursion variable {x} is not guarded in {p}")
            check_guarded(body)
        case Output(cont=cont) | Input(cont=cont):
            check_guarded(cont)
        case IntChoice(l, r) | ExtChoice(l, r):
            check_guarded(l)
            check_guarded(r)


def _fresh(name: str, avoid: set[str]) -> str:
    while name in avoid:
        name += "'"
    return name


def substitute(p: Process, x: str, v: Value) -> Process:
    """Replace the free occurrences of expression variable ``x`` by ``v``."""
    match p:
        case Output(peer, label, e, cont):
            return Output(peer, label, subst_expr(e, x, v), substitute(cont, x, v))
        case Input(peer, label, y, annot, cont):
            if y == x:
                return p
            return Input(peer, label, y, annot, substitute(cont, x, v))
        case IntChoice(l, r):
            return IntChoice(substitute(l, x, v), substitute(r, x, v))
        case ExtChoice(l, r):
            return ExtChoice(substitute(l, x, v), substitute(r, x, v))
        case Rec(y, body):
            return Rec(y, substitute(body, x, v))
    return p


def subst_pvar(p: Process, name: str, q: Process) -> Process:
    """Capture-avoiding substitution of process ``q`` for variable ``name``."""
    match p:
        case PVar(n):
            return q if n == name else p
        case Output(peer, label, e, cont):
            return Output(peer, label, e, subst_pvar(cont, name, q))
        case Input(peer, label, y, annot, cont):
            fv = free_vars(q)
            if y in fv and name in free_pvars(cont):
                z = _fresh(y, fv | free_vars(cont))
                cont = _rename_var(cont, y, z)
                y = z
            return Input(peer, label, y, annot, subst_pvar(cont, name, q))
        case IntChoice(l, r):
            return IntChoice(subst_pvar(l, name, q), subst_pvar(r, name, q))
        case ExtChoice(l, r):
            return ExtChoice(subst_pvar(l, name, q), subst_pvar(r, name, q))
        case Rec(y, body):
            if y == name:
                return p
            if y in free_pvars(q):
                z = _fresh(y, free_pvars(q) | free_pvars(body))
                body = subst_pvar(body, y, PVar(z))
                y = z
            return Rec(y, subst_pvar(body, name, q))
    return p


def _rename_var(p: Process, old: str, new: str) -> Process:
    match p:
        case Output(peer, label, e, cont):
            return Output(peer, label, _rename_expr(e, old, new), _rename_var(cont, old, new))
        case Input(peer, label, y, annot, cont):
            if y == old:
                return p
            return Input(peer, label, y, annot, _rename_var(cont, old, new))
        case IntChoice(l, r):
            return IntChoice(_rename_var(l, old, new), _rename_var(r, old, new))
        case ExtChoice(l, r):
            return ExtChoice(_rename_var(l, old, new), _rename_var(r, old, new))
        case Rec(y, body):
            return Rec(y, _rename_var(body, old, new))
    return p


def _rename_expr(e: Expr, old: str, new: str) -> Expr:
    match e:
        case Var(name) if name == old:
            return Var(new)
        case BinOp(op, l, r):
            return BinOp(op, _rename_expr(l, old, new), _rename_expr(r, old, new))
        case UnOp(op, a):
            return UnOp(op, _rename_expr(a, old, new))
    return e


def unfold(p: Process) -> Process:
    """One unfolding of ``rec X . P`` into ``P{rec X . P / X}``."""
    if not isinstance(p, Rec):
        raise NotARecursion(f"not a recursive process: {p}")
    if p.var in _unguarded(p.body):
        raise Unguarded(f"recursion variable {p.var} is not guarded in {p}")
    return subst_pvar(p.body, p.var, p)


# -- structural congruence ----------------------------------------------------------


def _sort_key(p: Process) -> str:
    return str(p)


def _normalize(p: Process) -> Process:
    match p:
        case IntChoice() | ExtChoice():
            node = type(p)
            leaves = sorted((_normalize(q) for q in choice_leaves(p)), key=_sort_key)
            return _nest(node, leaves)
        case Output(peer, label, e, cont):
            return Output(peer, label, e, _normalize(cont))
        case Input(peer, label, x, annot, cont):
            return Input(peer, label, x, annot, _normalize(cont))
        case Rec(x, body):
            return Rec(x, _normalize(body))
    return p


def normalize_process(p: Process) -> Process:
    """Canonical representative modulo commutativity/associativity of choices.

    Recursion is never unfolded here.
    """
    check_guarded(p)
    return _normalize(p)


# -- sessions -----------------------------------------------------------------------


@dataclass(frozen=True)
class Session:
    components: tuple[tuple[Participant, Process], ...]

    @classmethod
    def of(cls, *components: tuple[Participant, Process]) -> "Session":
        return cls(tuple(components))

    @property
    def participants(self) -> list[Participant]:
        return [p for p, _ in self.components]

    def process(self, participant: Participant) -> Process:
        for p, proc in self.components:
            if p == participant:
                return proc
        raise KeyError(participant)

    def __iter__(self) -> Iterator[tuple[Participant, Process]]:
        return iter(self.components)

    def __len__(self):
        return len(self.components)

    def __str__(self):
        if not self.components:
            return "end"
        return " | ".join(f"{p} : {proc}" for p, proc in self.components)


def normalize_session(n: Session) -> Session:
    """Drop inactive components and sort the rest by participant."""
    comps = [(p, normalize_process(proc)) for p, proc in n.components]
    comps = [(p, proc) for p, proc in comps if not isinstance(proc, Inact)]
    return Session(tuple(sorted(comps, key=lambda c: (c[0], _sort_key(c[1])))))


# -- actions ----------------------------------------------------------------------------


@dataclass(frozen=True)
class Tau:
    def __str__(self):
        return "tau"


TAU = Tau()


@dataclass(frozen=True)
class Send:
    peer: Participant
    label: str
    value: Value

    def __str__(self):
        return f"{self.peer}!{self.label}({self.value})"


@dataclass(frozen=True)
class Receive:
    """Input action; the received value is bound to ``var`` by the session layer."""

    peer: Participant
    label: str
    var: str

    def __str__(self):
        return f"{self.peer}?{self.label}({self.var})"


@dataclass(frozen=True)
class Message:
    sender: Participant
    receiver: Participant
    label: str
    value: Value

    def __str__(self):
        return f"{self.sender} -> {self.receiver} : {self.label}({self.value})"


Action = Union[Tau, Send, Receive]
SessionAction = Union[Tau, Message]
Trace = tuple[SessionAction, ...]


def messages(trace: Iterable[SessionAction]) -> list[tuple[int, Message]]:
    return [(i, m) for i, m in enumerate(trace) if isinstance(m, Message)]


def show_trace(trace: Trace) -> str:
    return " . ".join(str(a) for a in trace) if trace else "(empty)"


# -- transitions --------------------------------------------------------------------------


def step_process(p: Process, lattice: Lattice) -> set[tuple[Action, Process]]:
    """All one-step transitions of a closed process."""
    match p:
        case Output(peer, label, e, cont):
            return {(Send(peer, label, eval_expr(e, lattice)), cont)}
        case Input(peer, label, x, _, cont):
            return {(Receive(peer, label, x), cont)}
        case IntChoice():
            return {(TAU, q) for q in choice_leaves(p)}
        case ExtChoice():
            return {
                (a, q)
                for leaf in choice_leaves(p)
                for a, q in step_process(leaf, lattice)
                if not isinstance(a, Tau)
            }
        case Rec():
            return step_process(unfold(p), lattice)
        case PVar(name):
            raise FreeVariable(f"free process variable {name}")
    return set()


def _replace(n: Session, updates: dict[int, Process]) -> Session:
    return Session(tuple((p, updates.get(i, proc)) for i, (p, proc) in enumerate(n.components)))


def step_session(n: Session, lattice: Lattice) -> set[tuple[SessionAction, Session]]:
    """All one-step transitions of a session (τ moves and synchronisations)."""
    steps = [step_process(proc, lattice) for _, proc in n.components]
    result: set[tuple[SessionAction, Session]] = set()
    for i, (p, _) in enumerate(n.components):
        for act, cont in steps[i]:
            if isinstance(act, Tau):
                result.add((TAU, _replace(n, {i: cont})))
            elif isinstance(act, Send):
                for j, (q, _) in enumerate(n.components):
                    if j == i or q != act.peer:
                        continue
                    for other, cont_q in steps[j]:
                        if isinstance(other, Receive) and other.peer == p and other.label == act.label:
                            msg = Message(p, q, act.label, act.value)
                            after = _replace(n, {i: cont, j: substitute(cont_q, other.var, act.value)})
                            result.add((msg, after))
    return result


def traces(n: Session, depth: int, lattice: Lattice) -> set[Trace]:
    """Every trace of length at most ``depth``, found breadth first."""
    return set(explore(n, depth, lattice))


def explore(n: Session, depth: int, lattice: Lattice) -> dict[Trace, set[Session]]:
    """Map each trace of length at most ``depth`` to the normalized sessions it reaches."""
    if depth < 0:
        raise ValueError("depth must be non-negative")
    start = normalize_session(n)
    reached: dict[Trace, set[Session]] = {(): {start}}
    frontier = {((), start)}
    for _ in range(depth):
        nxt = set()
        for trace, state in frontier:
            for act, succ in step_session(state, lattice):
                nxt.add((trace + (act,), normalize_session(succ)))
        for trace, state in nxt:
            reached.setdefault(trace, set()).add(state)
        frontier = nxt
        if not frontier:
            break
    return reached
