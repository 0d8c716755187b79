"""Parser for the model description language.

A model file declares, in this order of dependency::

    lattice { levels bot mid top ; below bot mid ; below mid top ; }
    topics { phi psi ; indep phi psi ; }
    read p0 phi = top ;
    read default = bot ;
    proc P = p?l(x:nat^{bot,phi}).q!l(x + 1^{bot,phi}).end
    session S = p : P | q : Q
    global G = p -> q : l(nat^{bot,phi}) . end

Process names and process variables start with an upper-case letter.
Levels and topics must be declared before they are used.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .calculus import (
    SORTS,
    AnnotatedSort,
    BinOp,
    Expr,
    ExtChoice,
    INACT,
    Input,
    IntChoice,
    Lit,
    Output,
    Process,
    PVar,
    Rec,
    Session,
    UnOp,
    Value,
    Var,
    check_guarded,
    free_pvars,
    subst_pvar,
)
from .errors import DSLSyntaxError, DuplicateDefinition, SessionsError, UnknownIdentifier
from .security import Lattice, ReadingPolicy, Security, TopicUniverse, validate_lattice
from .session_types import (
    END,
    Branch,
    Comm,
    GlobalType,
    In,
    Out,
    SessionType,
    TRec,
    TVar,
    wf_global_type,
)

KEYWORDS = {
    "lattice", "levels", "below", "topics", "indep", "read", "default",
    "proc", "session", "global", "rec", "end", "true", "false",
    "not", "and", "or", *SORTS,
}  # fmt: skip

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+|\#[^\n]*)
  | (?P<nl>\n)
  | (?P<num>\d+)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<op>\(\+\)|->|\+\+|==|[!?(){}.,:;|=+\-*<^])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # num | string | ident | op | eof
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise DSLSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line, line_start = line + 1, m.end()
        elif kind != "ws":
            tokens.append(Token(kind, m.group(), line, m.start() - line_start + 1))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


@dataclass
class Model:
    lattice: Lattice
    universe: TopicUniverse
    policy: ReadingPolicy
    processes: dict[str, Process] = field(default_factory=dict)
    sessions: dict[str, Session] = field(default_factory=dict)
    globals: dict[str, GlobalType] = field(default_factory=dict)

    @property
    def security(self) -> Security:
        return Security(self.lattice, self.universe, self.policy)


class Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0
        self.lattice: Lattice | None = None
        self.universe: TopicUniverse | None = None

    # -- token helpers

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def error(self, message: str, tok: Token | None = None, cls=DSLSyntaxError):
        tok = tok or self.tok
        return cls(message, tok.line, tok.col)

    def at(self, text: str) -> bool:
        return self.tok.kind in ("op", "ident") and self.tok.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        tok = self.tok
        self.i += 1
        return tok

    def ident(self, what: str = "identifier") -> str:
        tok = self.tok
        if tok.kind != "ident" or tok.text in KEYWORDS:
            raise self.error(f"expected {what}, found {tok.text or 'end of input'!r}")
        self.i += 1
        return tok.text

    def level(self) -> str:
        tok = self.tok
        name = self.ident("security level")
        if self.lattice is None:
            raise self.error("security level used before the lattice is declared", tok)
        if name not in self.lattice:
            raise self.error(f"unknown security level {name!r}", tok, UnknownIdentifier)
        return name

    def topic(self) -> str:
        tok = self.tok
        name = self.ident("topic")
        if self.universe is None:
            raise self.error("topic used before the topics are declared", tok)
        if name not in self.universe:
            raise self.error(f"unknown topic {name!r}", tok, UnknownIdentifier)
        return name

    def done(self) -> None:
        if self.tok.kind != "eof":
            raise self.error(f"unexpected {self.tok.text!r}")

    # -- annotations and expressions

    def annotation(self) -> tuple[str, str]:
        self.expect("^")
        self.expect("{")
        level = self.level()
        self.expect(",")
        topic = self.topic()
        self.expect("}")
        return level, topic

    def annotated_sort(self) -> AnnotatedSort:
        tok = self.tok
        if not (tok.kind == "ident" and tok.text in SORTS):
            raise self.error(f"expected a sort ({'|'.join(SORTS)}), found {tok.text!r}")
        self.i += 1
        return AnnotatedSort(tok.text, *self.annotation())

    def expr(self) -> Expr:
        left = self._and()
        while self.accept("or"):
            left = BinOp("or", left, self._and())
        return left

    def _and(self) -> Expr:
        left = self._not()
        while self.accept("and"):
            left = BinOp("and", left, self._not())
        return left

    def _not(self) -> Expr:
        if self.accept("not"):
            return UnOp("not", self._not())
        return self._cmp()

    def _cmp(self) -> Expr:
        left = self._add()
        for op in ("<", "=="):
            if self.accept(op):
                return BinOp(op, left, self._add())
        return left

    def _add(self) -> Expr:
        left = self._mul()
        while self.tok.kind == "op" and self.tok.text in ("+", "-", "++"):
            op = self.tok.text
            self.i += 1
            left = BinOp(op, left, self._mul())
        return left

    def _mul(self) -> Expr:
        left = self._unary()
        while self.accept("*"):
            left = BinOp("*", left, self._unary())
        return left

    def _unary(self) -> Expr:
        if self.at("-") or self.at("+"):
            sign = self.tok.text
            if self.peek().kind == "num":
                self.i += 1
                n = int(self.tok.text)
                self.i += 1
                return Lit(Value(-n if sign == "-" else n, "int", *self.annotation()))
            if sign == "-":
                self.i += 1
                return UnOp("-", self._unary())
        return self._atom()

    def _atom(self) -> Expr:
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return Lit(Value(int(tok.text), "nat", *self.annotation()))
        if tok.kind == "string":
            self.i += 1
            return Lit(Value(json.loads(tok.text), "str", *self.annotation()))
        if self.at("true") or self.at("false"):
            self.i += 1
            return Lit(Value(tok.text == "true", "bool", *self.annotation()))
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if tok.kind == "ident" and tok.text not in KEYWORDS:
            self.i += 1
            return Var(tok.text)
        raise self.error(f"expected an expression, found {tok.text or 'end of input'!r}")

    # -- processes

    def process(self) -> Process:
        operands = [self._prefix()]
        ops = []
        while self.at("+") or self.at("(+)"):
            ops.append(self.tok)
            self.i += 1
            operands.append(self._prefix())
        if not ops:
            return operands[0]
        if len({t.text for t in ops}) > 1:
            raise self.error("mixing (+) and + requires parentheses", ops[0])
        node = IntChoice if ops[0].text == "(+)" else ExtChoice
        result = operands[-1]
        for p in reversed(operands[:-1]):
            result = node(p, result)
        return result

    def _prefix(self) -> Process:
        tok = self.tok
        if self.accept("end"):
            return INACT
        if tok.kind == "num" and tok.text == "0":
            self.i += 1
            return INACT
        if self.accept("rec"):
            name = self._pvar_name()
            self.expect(".")
            return Rec(name, self.process())
        if self.accept("("):
            p = self.process()
            self.expect(")")
            return p
        if tok.kind == "ident" and tok.text not in KEYWORDS and self.peek().text in ("!", "?"):
            peer = self.ident("participant")
            if self.accept("!"):
                label = self.ident("label")
                self.expect("(")
                e = self.expr()
                self.expect(")")
                self.expect(".")
                return Output(peer, label, e, self._prefix())
            self.expect("?")
            label = self.ident("label")
            self.expect("(")
            var = self.ident("variable")
            annot = self.annotated_sort() if self.accept(":") else None
            self.expect(")")
            self.expect(".")
            return Input(peer, label, var, annot, self._prefix())
        if tok.kind == "ident" and tok.text not in KEYWORDS:
            return PVar(self._pvar_name())
        raise self.error(f"expected a process, found {tok.text or 'end of input'!r}")

    def _pvar_name(self) -> str:
        tok = self.tok
        name = self.ident("process variable")
        if not name[0].isupper():
            raise self.error(f"process variables start with an upper-case letter, found {name!r}", tok)
        return name

    # -- types

    def _branch(self) -> Branch:
        label = self.ident("label")
        self.expect("(")
        s = self.annotated_sort()
        self.expect(")")
        self.expect(".")
        return Branch(label, s, None)

    def session_type(self) -> SessionType:
        if self.accept("end"):
            return END
        if self.accept("rec"):
            name = self.ident("type variable")
            self.expect(".")
            return TRec(name, self.session_type())
        peer = self.ident("participant or type variable")
        if not (self.at("!") or self.at("?")):
            return TVar(peer)
        kind = Out if self.tok.text == "!" else In
        self.i += 1
        branches = []
        if self.accept("{"):
            while True:
                b = self._branch()
                branches.append(Branch(b.label, b.sort, self.session_type()))
                if not self.accept(","):
                    break
            self.expect("}")
        else:
            b = self._branch()
            branches.append(Branch(b.label, b.sort, self.session_type()))
        return kind(peer, tuple(branches))

    def global_type(self) -> GlobalType:
        if self.accept("end"):
            return END
        if self.accept("rec"):
            name = self.ident("type variable")
            self.expect(".")
            return TRec(name, self.global_type())
        sender = self.ident("participant or type variable")
        if not self.accept("->"):
            return TVar(sender)
        receiver = self.ident("participant")
        self.expect(":")
        branches = []
        if self.accept("{"):
            while True:
                b = self._branch()
                branches.append(Branch(b.label, b.sort, self.global_type()))
                if not self.accept(","):
                    break
            self.expect("}")
        else:
            b = self._branch()
            branches.append(Branch(b.label, b.sort, self.global_type()))
        return Comm(sender, receiver, tuple(branches))

    def session(self) -> Session:
        comps = []
        while True:
            who = self.ident("participant")
            self.expect(":")
            comps.append((who, self.process()))
            if not self.accept("|"):
                break
        return Session(tuple(comps))

    # -- model

    def model(self) -> Model:
        policy: dict[tuple[str, str], str] = {}
        default = None
        procs: dict[str, Process] = {}
        sessions: dict[str, Session] = {}
        globs: dict[str, GlobalType] = {}

        while self.tok.kind != "eof":
            tok = self.tok
            if self.accept("lattice"):
                if self.lattice is not None:
                    raise self.error("lattice declared twice", tok, DuplicateDefinition)
                self.lattice = self._lattice_block()
            elif self.accept("topics"):
                if self.universe is not None:
                    raise self.error("topics declared twice", tok, DuplicateDefinition)
                self.universe = self._topics_block()
            elif self.accept("read"):
                if self.accept("default"):
                    self.expect("=")
                    if default is not None:
                        raise self.error("default reading level declared twice", tok, DuplicateDefinition)
                    default = self.level()
                else:
                    who = self.ident("participant")
                    topic = self.topic()
                    self.expect("=")
                    if (who, topic) in policy:
                        raise self.error(f"reading level of {who} on {topic} declared twice", tok, DuplicateDefinition)
                    policy[who, topic] = self.level()
            elif self.accept("proc"):
                name_tok = self.tok
                name = self._pvar_name()
                self._fresh_name(name, name_tok, procs)
                self.expect("=")
                procs[name] = self._resolve(self.process(), procs, name_tok)
            elif self.accept("session"):
                name_tok = self.tok
                name = self.ident("session name")
                self._fresh_name(name, name_tok, sessions)
                self.expect("=")
                n = self.session()
                sessions[name] = Session(
                    tuple((p, self._resolve(proc, procs, name_tok)) for p, proc in n.components)
                )
            elif self.accept("global"):
                name_tok = self.tok
                name = self.ident("global type name")
                self._fresh_name(name, name_tok, globs)
                self.expect("=")
                g = self.global_type()
                try:
                    wf_global_type(g)
                except SessionsError as err:
                    raise self.error(f"ill-formed global type {name}: {err}", name_tok) from None
                globs[name] = g
            else:
                raise self.error(f"expected a declaration, found {tok.text!r}")
            self.accept(";")

        if self.lattice is None:
            raise DSLSyntaxError("missing lattice declaration", 1, 1)
        if self.universe is None:
            raise DSLSyntaxError("missing topics declaration", 1, 1)
        policy_obj = ReadingPolicy(policy, default if default is not None else self.lattice.bottom)
        return Model(self.lattice, self.universe, policy_obj, procs, sessions, globs)

    def _fresh_name(self, name, tok, table):
        if name in table:
            raise self.error(f"{name} defined twice", tok, DuplicateDefinition)

    def _resolve(self, p: Process, procs: dict[str, Process], tok: Token) -> Process:
        for name in sorted(free_pvars(p)):
            if name not in procs:
                raise self.error(f"unknown process {name}", tok, UnknownIdentifier)
            p = subst_pvar(p, name, procs[name])
        try:
            check_guarded(p)
        except SessionsError as err:
            raise self.error(str(err), tok) from None
        return p

    def _lattice_block(self) -> Lattice:
        self.expect("{")
        self.expect("levels")
        levels = []
        while self.tok.kind == "ident" and not self.at(";"):
            levels.append(self.ident("level"))
        self.expect(";")
        covers = []
        while self.accept("below"):
            covers.append((self.ident("level"), self.ident("level")))
            self.expect(";")
        tok = self.expect("}")
        try:
            return validate_lattice(levels, covers)
        except SessionsError as err:
            raise self.error(str(err), tok) from None

    def _topics_block(self) -> TopicUniverse:
        self.expect("{")
        topics = []
        while self.tok.kind == "ident" and not self.at(";"):
            topics.append(self.ident("topic"))
        self.expect(";")
        pairs = []
        while self.accept("indep"):
            tok = self.tok
            a, b = self.ident("topic"), self.ident("topic")
            for t in (a, b):
                if t not in topics:
                    raise self.error(f"unknown topic {t!r}", tok, UnknownIdentifier)
            if a == b:
                raise self.error(f"topic {a!r} cannot be independent of itself", tok)
            pairs.append((a, b))
            self.expect(";")
        self.expect("}")
        return TopicUniverse.of(topics, pairs)


def parse_model(text: str) -> Model:
    return Parser(text).model()


def _parse_with(text: str, method: str, lattice=None, universe=None):
    p = Parser(text)
    p.lattice, p.universe = lattice, universe
    if lattice is None or universe is None:
        # Without a model, accept any level/topic names.
        p.level = lambda: p.ident("security level")
        p.topic = lambda: p.ident("topic")
    result = getattr(p, method)()
    p.accept(";")
    p.done()
    return result


def parse_process(text: str, lattice=None, universe=None) -> Process:
    return _parse_with(text, "process", lattice, universe)


def parse_expr(text: str, lattice=None, universe=None) -> Expr:
    return _parse_with(text, "expr", lattice, universe)


def parse_session(text: str, lattice=None, universe=None) -> Session:
    return _parse_with(text, "session", lattice, universe)


def parse_session_type(text: str, lattice=None, universe=None) -> SessionType:
    return _parse_with(text, "session_type", lattice, universe)


def parse_global(text: str, lattice=None, universe=None) -> GlobalType:
    return _parse_with(text, "global_type", lattice, universe)


def format_model(model: Model) -> str:
    """Print a model back to concrete syntax (named processes are inlined)."""
    lines = ["lattice { levels " + " ".join(model.lattice.levels) + " ;"]
    lines += [f"  below {a} {b} ;" for a, b in model.lattice.covers()]
    lines.append("}")
    lines.append("topics { " + " ".join(model.universe.topics) + " ;")
    lines += [f"  indep {a} {b} ;" for a, b in sorted(tuple(sorted(p)) for p in model.universe.indep)]
    lines.append("}")
    for (who, topic), level in model.policy.entries.items():
        lines.append(f"read {who} {topic} = {level} ;")
    lines.append(f"read default = {model.policy.default} ;")
    for name, p in model.processes.items():
        lines.append(f"proc {name} = {p}")
    for name, n in model.sessions.items():
        lines.append(f"session {name} = {n}")
    for name, g in model.globals.items():
        lines.append(f"global {name} = {g}")
    return "\n".join(lines) + "\n"
