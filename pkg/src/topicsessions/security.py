"""Security lattice, topic independence and reading levels."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping

from .errors import NotALattice, NotAPartialOrder, UnknownLevel, UnknownTopic

Level = str
Topic = str
Participant = str


@dataclass(frozen=True)
class Lattice:
    """A finite lattice of security levels.

    Build instances with :func:`validate_lattice`; the constructor trusts its
    arguments.
    """

    levels: tuple[Level, ...]
    order: frozenset[tuple[Level, Level]]
    bottom: Level
    top: Level
    _join: Mapping[tuple[Level, Level], Level] = field(repr=False, compare=False)
    _meet: Mapping[tuple[Level, Level], Level] = field(repr=False, compare=False)

    def __contains__(self, level: object) -> bool:
        return level in self.levels

    def _check(self, *levels: Level) -> None:
        for level in levels:
            if level not in self.levels:
                raise UnknownLevel(f"unknown security level {level!r}")

    def leq(self, l1: Level, l2: Level) -> bool:
        self._check(l1, l2)
        return (l1, l2) in self.order

    def join(self, l1: Level, l2: Level) -> Level:
        self._check(l1, l2)
        return self._join[l1, l2]

    def meet(self, l1: Level, l2: Level) -> Level:
        self._check(l1, l2)
        return self._meet[l1, l2]

    def join_all(self, levels: Iterable[Level]) -> Level:
        result = self.bottom
        for level in levels:
            result = self.join(result, level)
        return result

    def covers(self) -> list[tuple[Level, Level]]:
        """Hasse diagram edges, in level order."""
        strict = {(a, b) for (a, b) in self.order if a != b}
        return [
            (a, b)
            for a in self.levels
            for b in self.levels
            if (a, b) in strict
            and not any((a, c) in strict and (c, b) in strict for c in self.levels)
        ]


def _bound(candidates: list[Level], order: frozenset, below: bool) -> Level | None:
    # below=True: greatest element of candidates; otherwise least.
    for c in candidates:
        if all(((d, c) if below else (c, d)) in order for d in candidates):
            return c
    return None


def validate_lattice(
    levels: Iterable[Level], covers: Iterable[tuple[Level, Level]]
) -> Lattice:
    """Close ``covers`` reflexively and transitively and check lattice laws.

    Each pair ``(a, b)`` in ``covers`` states ``a ⊑ b``.
    """
    levels = tuple(dict.fromkeys(levels))
    if not levels:
        raise NotALattice("a lattice needs at least one level")
    known = set(levels)
    order = {(l, l) for l in levels}
    for a, b in covers:
        for l in (a, b):
            if l not in known:
                raise UnknownLevel(f"unknown security level {l!r} in cover relation")
        order.add((a, b))
    # Warshall closure
    for k in levels:
        for i in levels:
            if (i, k) in order:
                for j in levels:
                    if (k, j) in order:
                        order.add((i, j))
    for a, b in combinations(levels, 2):
        if (a, b) in order and (b, a) in order:
            raise NotAPartialOrder(f"cycle between {a!r} and {b!r}")
    order = frozenset(order)

    join: dict[tuple[Level, Level], Level] = {}
    meet: dict[tuple[Level, Level], Level] = {}
    for a in levels:
        for b in levels:
            ups = [c for c in levels if (a, c) in order and (b, c) in order]
            lub = _bound(ups, order, below=False)
            if lub is None:
                raise NotALattice(f"{a!r} and {b!r} have no least upper bound")
            downs = [c for c in levels if (c, a) in order and (c, b) in order]
            glb = _bound(downs, order, below=True)
            if glb is None:
                raise NotALattice(f"{a!r} and {b!r} have no greatest lower bound")
            join[a, b] = lub
            meet[a, b] = glb

    bottom = _bound(list(levels), order, below=False)
    top = _bound(list(levels), order, below=True)
    assert bottom is not None and top is not None  # guaranteed by joins/meets
    return Lattice(levels, order, bottom, top, join, meet)


def chain(*levels: Level) -> Lattice:
    """Totally ordered lattice ``levels[0] ⊑ levels[1] ⊑ ...``."""
    return validate_lattice(levels, zip(levels, levels[1:]))


@dataclass(frozen=True)
class TopicUniverse:
    topics: tuple[Topic, ...]
    indep: frozenset[frozenset[Topic]] = frozenset()

    def __post_init__(self):
        for pair in self.indep:
            if len(pair) != 2:
                raise ValueError(f"independence must relate two distinct topics: {set(pair)}")
            for t in pair:
                if t not in self.topics:
                    raise UnknownTopic(f"unknown topic {t!r} in independence relation")

    @classmethod
    def of(cls, topics: Iterable[Topic], indep: Iterable[tuple[Topic, Topic]] = ()):
        pairs = set()
        for a, b in indep:
            if a == b:
                raise ValueError(f"topic {a!r} cannot be independent of itself")
            pairs.add(frozenset((a, b)))
        return cls(tuple(dict.fromkeys(topics)), frozenset(pairs))

    def __contains__(self, topic: object) -> bool:
        return topic in self.topics

    def _check(self, *topics: Topic) -> None:
        for t in topics:
            if t not in self.topics:
                raise UnknownTopic(f"unknown topic {t!r}")

    def independent(self, t1: Topic, t2: Topic) -> bool:
        self._check(t1, t2)
        return frozenset((t1, t2)) in self.indep

    def related(self, t1: Topic, t2: Topic) -> bool:
        return not self.independent(t1, t2)

    def with_indep(self, t1: Topic, t2: Topic) -> "TopicUniverse":
        return TopicUniverse.of(self.topics, [tuple(p) for p in self.indep] + [(t1, t2)])


@dataclass(frozen=True)
class ReadingPolicy:
    """Reading level of each participant on each topic; absent pairs use ``default``."""

    entries: Mapping[tuple[Participant, Topic], Level]
    default: Level

    def level(self, participant: Participant, topic: Topic) -> Level:
        return self.entries.get((participant, topic), self.default)

    def __hash__(self):
        return hash((frozenset(self.entries.items()), self.default))


@dataclass(frozen=True)
class Security:
    """Everything the oracle and the type system need to judge levels and topics."""

    lattice: Lattice
    universe: TopicUniverse
    policy: ReadingPolicy

    def __post_init__(self):
        for (_, topic), level in self.policy.entries.items():
            self.universe._check(topic)
            self.lattice._check(level)
        self.lattice._check(self.policy.default)

    def leq(self, l1: Level, l2: Level) -> bool:
        return self.lattice.leq(l1, l2)

    def join(self, l1: Level, l2: Level) -> Level:
        return self.lattice.join(l1, l2)

    def independent(self, t1: Topic, t2: Topic) -> bool:
        return self.universe.independent(t1, t2)

    def reading_level(self, participant: Participant, topic: Topic) -> Level:
        return reading_level(self.policy, participant, topic, self.universe)


def reading_level(
    policy: ReadingPolicy,
    participant: Participant,
    topic: Topic,
    universe: TopicUniverse | None = None,
) -> Level:
    if universe is not None:
        universe._check(topic)
    return policy.level(participant, topic)
