"""Trace-level safety: access control and leak freedom."""

from __future__ import annotations

from dataclasses import dataclass, field

from .calculus import Message, Session, Trace, explore, messages, show_trace
from .security import Security


@dataclass(frozen=True)
class Violation:
    kind: str  # "AC" or "LF"
    trace: Trace
    indices: tuple[int, ...]
    explanation: str

    def sort_key(self):
        return (len(self.trace), show_trace(self.trace), self.kind, self.indices)


def relay_pairs(trace: Trace) -> list[tuple[int, int]]:
    """Index pairs ``i < j`` where message ``i``'s receiver sends message ``j``."""
    msgs = messages(trace)
    return [
        (i, j)
        for a, (i, m) in enumerate(msgs)
        for j, n in msgs[a + 1 :]
        if m.receiver == n.sender
    ]


def check_ac(trace: Trace, sec: Security) -> list[Violation]:
    out = []
    for i, m in messages(trace):
        bound = sec.reading_level(m.receiver, m.value.topic)
        if not sec.leq(m.value.level, bound):
            out.append(
                Violation(
                    "AC",
                    trace,
                    (i,),
                    f"{m.value.level} is not below rho({m.receiver},{m.value.topic}) = {bound}",
                )
            )
    return out


def check_lf(trace: Trace, sec: Security) -> list[Violation]:
    out = []
    for i, j in relay_pairs(trace):
        first: Message = trace[i]
        second: Message = trace[j]
        l1, t1 = first.value.level, first.value.topic
        l2, t2 = second.value.level, second.value.topic
        if not sec.leq(l1, l2) and not sec.independent(t1, t2):
            out.append(
                Violation(
                    "LF",
                    trace,
                    (i, j),
                    f"{first.receiver} relays {l1} on {t1} then sends {l2} on related topic {t2}",
                )
            )
    return out


@dataclass
class SafetyReport:
    depth: int
    traces_explored: int
    violations: list[Violation] = field(default_factory=list)

    @property
    def safe(self) -> bool:
        return not self.violations


def check_safe_session(n: Session, depth: int, sec: Security) -> SafetyReport:
    """Judge every trace of length at most ``depth``.

    Traces are prefix closed, so each violation is reported once, on the
    shortest trace that exhibits it (the one ending at the offending message).
    """
    all_traces = explore(n, depth, sec.lattice)
    found = []
    for trace in all_traces:
        if not trace or not isinstance(trace[-1], Message):
            continue
        last = len(trace) - 1
        for v in check_ac(trace, sec) + check_lf(trace, sec):
            if v.indices[-1] == last:
                found.append(v)
    found.sort(key=Violation.sort_key)
    return SafetyReport(depth, len(all_traces), found)
