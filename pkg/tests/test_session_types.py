import pytest
from hypothesis import assume, given, settings, strategies as st

from topicsessions.calculus import AnnotatedSort
from topicsessions.errors import (
    DuplicateLabel,
    FreeTypeVariable,
    NotProjectable,
    ResidualUndefined,
    SelfCommunication,
    Unguarded,
)
from topicsessions.security import chain
from topicsessions.session_types import (
    END,
    Branch,
    Comm,
    In,
    Out,
    TRec,
    TVar,
    agrees,
    comm,
    inp,
    out,
    participants,
    project,
    reachable,
    reduce_global,
    reduce_type,
    residual,
    safe_type,
    subtype,
    subtype_failure,
    type_equiv,
    unfold_type,
    wf_global_type,
    wf_session_type,
)
from topicsessions.syntax import parse_session_type

from strategies import (
    global_types,
    reference_agrees,
    reference_safe,
    reference_subtype,
    securities,
    security,
    session_types,
    subtypes_of,
)

THREE = chain("bot", "mid", "top")


def S(level="bot", topic="phi", sort="nat"):
    return AnnotatedSort(sort, level, topic)


# -- well-formedness --------------------------------------------------------------


def test_well_formedness():
    wf_session_type(END)
    with pytest.raises(DuplicateLabel):
        wf_session_type(Out("q", (Branch("l", S(), END), Branch("l", S(sort="int"), END))))
    with pytest.raises(Unguarded):
        wf_session_type(TRec("t", TVar("t")))
    with pytest.raises(FreeTypeVariable):
        wf_session_type(out("q", "l", S(), TVar("t")))
    with pytest.raises(SelfCommunication):
        wf_global_type(comm("p", "p", "l", S()))


# -- subtyping ----------------------------------------------------------------------


def test_subtyping_examples():
    assert subtype(END, END)
    two_in = In("p", (Branch("a", S(), END), Branch("b", S(), END)))
    assert subtype(two_in, inp("p", "a", S()))
    assert not subtype(inp("p", "a", S()), two_in)
    one_out = out("q", "a", S())
    two_out = Out("q", (Branch("a", S(), END), Branch("b", S(), END)))
    assert subtype(one_out, two_out)
    assert not subtype(two_out, one_out)
    assert not subtype(out("q", "a", S()), out("r", "a", S()))
    assert not subtype(out("q", "a", S("mid")), out("q", "a", S()))


def test_subtyping_failure_path():
    t1 = out("q", "a", S(), inp("p", "b", S()))
    t2 = out("q", "a", S(), inp("p", "c", S()))
    path, cls, _ = subtype_failure(t1, t2)
    assert path == ("q!a", "p?c") and cls.__name__ == "LabelNotOffered"


def test_recursive_subtyping():
    loop = TRec("t", inp("p", "l", S(), TVar("t")))
    unrolled = inp("p", "l", S(), loop)
    assert subtype(loop, unrolled) and subtype(unrolled, loop)
    twice = TRec("u", inp("p", "l", S(), inp("p", "l", S(), TVar("u"))))
    assert type_equiv(loop, twice)


@settings(max_examples=200)
@given(session_types(), session_types())
def test_subtype_agrees_with_bounded_unfolding(t1, t2):
    assert subtype(t1, t2) == reference_subtype(t1, t2)


@settings(max_examples=200)
@given(st.data())
def test_subtype_reflexive_and_transitive(data):
    t = data.draw(session_types())
    assert subtype(t, t)
    mid = data.draw(subtypes_of(t))
    low = data.draw(subtypes_of(mid))
    assert subtype(mid, t) and subtype(low, mid)
    assert subtype(low, t)


@settings(max_examples=200)
@given(session_types(), session_types(), session_types())
def test_subtype_transitive_on_arbitrary_triples(a, b, c):
    if subtype(a, b) and subtype(b, c):
        assert subtype(a, c)


@settings(max_examples=200)
@given(session_types(), session_types())
def test_visited_set_is_bounded(t1, t2):
    visited = set()
    subtype(t1, t2, visited)
    assert len(visited) <= len(reachable(t1)) * len(reachable(t2))
    agree_seen = set()
    agrees("bot", "phi", t1, security(), agree_seen)
    assert len(agree_seen) <= len(reachable(t1))


# -- agreement and safety -------------------------------------------------------------


def test_pc_chair_agreement():
    sec = security(THREE)
    t = parse_session_type("p1?l(str^{bot,psi}).p2!l(str^{bot,psi}).p2?l(str^{bot,psi}).p1!l(str^{bot,psi}).end")
    assert agrees("mid", "phi", t, sec)
    assert not agrees("mid", "phi", t, security(THREE, indep=()))


def test_agreement_basics():
    sec = security(THREE, indep=())
    for level in THREE.levels:
        assert agrees(level, "phi", END, sec)
    assert not agrees("top", "phi", out("q", "l", S("bot", sort="bool")), sec)


def test_safe_type_examples():
    t = inp("p", "l", S("top", sort="bool"), out("r", "m", S("bot", "psi", "bool")))
    sec = security(chain("bot", "top"), entries={("p", "phi"): "top"}, default="top")
    assert safe_type(t, sec)
    related = security(chain("bot", "top"), indep=(), entries={("p", "phi"): "top"}, default="top")
    assert not safe_type(t, related)


def test_safe_out_uses_reading_level_of_receiver():
    sec = security(THREE, entries={("q", "phi"): "mid"}, default="bot")
    assert safe_type(out("q", "l", S("mid")), sec)
    assert not safe_type(out("q", "l", S("top")), sec)
    assert not safe_type(out("r", "l", S("mid")), sec)


def test_pc_projection_is_safe(pc_model):
    g = pc_model.globals["GPC"]
    for p in ("p0", "p1", "p2"):
        assert safe_type(project(g, p), pc_model.security)


@settings(max_examples=200)
@given(session_types(), securities(), st.sampled_from(["bot", "a", "b", "top"]), st.sampled_from(["phi", "psi", "chi"]))
def test_agreement_and_safety_match_reference(t, sec, level, topic):
    assert agrees(level, topic, t, sec) == reference_agrees(level, topic, t, sec)
    assert safe_type(t, sec) == reference_safe(t, sec)
    assert agrees(sec.lattice.bottom, topic, t, sec)


@settings(max_examples=200)
@given(session_types(), securities(), st.sampled_from(["bot", "a", "b", "top"]), st.sampled_from(["phi", "psi", "chi"]))
def test_agreement_and_safety_survive_reduction(t, sec, level, topic):
    for r in reduce_type(t):
        if agrees(level, topic, t, sec):
            assert agrees(level, topic, r, sec)
        if safe_type(t, sec):
            assert safe_type(r, sec)


# -- reduction ------------------------------------------------------------------------------


def test_reduce_type():
    assert reduce_type(out("q", "l", S())) == {END}
    t1, t2 = out("r", "x", S()), out("r", "y", S())
    assert reduce_type(In("p", (Branch("a", S(), t1), Branch("b", S(), t2)))) == {t1, t2}
    assert reduce_type(END) == set()
    union = Out("q", (Branch("a", S(), t1), Branch("b", S(), t2)))
    assert reduce_type(union) == {t1, t2, out("q", "a", S(), t1), out("q", "b", S(), t2)}


# -- global types ---------------------------------------------------------------------------


SECTION_EXAMPLE = comm("r", "s", "m", S("bot", "phi"), comm("p", "q", "l", S("top", "psi", "bool")))


def test_participants():
    assert participants(END) == set()
    assert participants(TRec("t", comm("p", "q", "l", S(), TVar("t")))) == {"p", "q"}


def test_pc_participants_and_projection(pc_model):
    g = pc_model.globals["GPC"]
    assert participants(g) == {"p0", "p1", "p2"}
    assert str(project(g, "p0")) == (
        "p1?l(str^{mid,phi}).p1?l(str^{bot,psi}).p2!l(str^{bot,psi}).p2?l(str^{bot,psi}).p1!l(str^{bot,psi}).end"
    )
    assert project(END, "p0") == END


def test_projection_checks_uninvolved_branches():
    g = Comm("p", "q", (Branch("a", S(), comm("r", "p", "l", S())), Branch("b", S(), END)))
    with pytest.raises(NotProjectable):
        project(g, "r")
    ok = Comm("p", "q", (Branch("a", S(), comm("r", "s", "l", S())), Branch("b", S(), comm("r", "s", "l", S()))))
    assert project(ok, "r") == out("s", "l", S())


def test_projection_of_recursion():
    g = TRec("t", comm("p", "q", "l", S(), TVar("t")))
    assert project(g, "p") == TRec("t", out("q", "l", S(), TVar("t")))
    assert project(g, "r") == END


def test_projection_up_to_renaming_and_label_order():
    b1 = TRec("x", Out("s", (Branch("a", S(), TVar("x")), Branch("b", S(), END))))
    b2 = TRec("y", Out("s", (Branch("b", S(), END), Branch("a", S(), TVar("y")))))
    g = Comm("p", "q", (Branch("a", S(), _as_global(b1)), Branch("b", S(), _as_global(b2))))
    assert type_equiv(project(g, "r"), b1)


def _as_global(t):
    # r's local choice towards s as a global type
    match t:
        case TRec(v, body):
            return TRec(v, _as_global(body))
        case Out(q, bs):
            return Comm("r", q, tuple(Branch(b.label, b.sort, _as_global(b.cont)) for b in bs))
    return t


def test_residual_examples():
    assert residual(SECTION_EXAMPLE, "p", "l", "q") == comm("r", "s", "m", S("bot", "phi"))
    assert residual(comm("p", "q", "l", S()), "p", "l", "q") == END
    with pytest.raises(ResidualUndefined):
        residual(END, "p", "l", "q")
    with pytest.raises(ResidualUndefined):
        residual(TVar("t"), "p", "l", "q")
    with pytest.raises(ResidualUndefined):
        residual(comm("p", "r", "l", S(), comm("p", "q", "l", S())), "p", "l", "q")


def test_residual_through_recursion():
    g = TRec("t", comm("r", "s", "m", S(), comm("p", "q", "l", S(), TVar("t"))))
    assert type_equiv(residual(g, "p", "l", "q"), comm("r", "s", "m", S(), g))


def test_reduce_global():
    steps = reduce_global(SECTION_EXAMPLE)
    assert ("r", "m", "s", comm("p", "q", "l", S("top", "psi", "bool"))) in steps
    assert ("p", "l", "q", comm("r", "s", "m", S("bot", "phi"))) in steps
    assert reduce_global(END) == set()


def test_reduce_global_pc_head(pc_model):
    g = pc_model.globals["GPC"]
    assert ("p1", "l", "p0", g.branches[0].cont) in reduce_global(g)


def _projectable(g):
    try:
        return {r: project(g, r) for r in participants(g)}
    except NotProjectable:
        return None


@settings(max_examples=300, deadline=None)
@given(global_types(depth=4))
def test_projection_commutes_with_residual(g):
    before = _projectable(g)
    assume(before is not None)
    for p, label, q, g2 in reduce_global(g):
        after = _projectable(g2)
        assert after is not None
        for r, t in before.items():
            t2 = after.get(r, END)
            if r not in (p, q):
                assert type_equiv(t, t2)
        sender, receiver = unfold_type(before[p]), unfold_type(before[q])
        assert isinstance(sender, Out) and isinstance(receiver, In)
        [sb] = [b for b in sender.branches if b.label == label]
        [rb] = [b for b in receiver.branches if b.label == label]
        assert subtype(sb.cont, after.get(p, END))
        assert subtype(rb.cont, after.get(q, END))
