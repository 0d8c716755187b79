import random

from topicsessions import properties
from topicsessions.calculus import INACT, Session
from topicsessions.checker import EMPTY, SessionReport, check_process, check_session
from topicsessions.properties import (
    implement,
    random_instance,
    run_theorem_suite,
    soundness_property,
    subject_reduction_property,
)
from topicsessions.session_types import END, participants, project, safe_type, subtype

from conftest import load
from strategies import security


def test_pc_properties(pc_model):
    n, g, sec = pc_model.sessions["PC"], pc_model.globals["GPC"], pc_model.security
    sound = soundness_property(n, g, sec, 5)
    assert sound.passed and not sound.vacuous
    sr = subject_reduction_property(n, g, sec, 5)
    assert sr.passed and sr.stats["explored"] == 5
    assert subject_reduction_property(n, g, sec, 0).passed


def test_untypable_leak_is_vacuous_pass():
    model = load("relay.ses")
    rep = soundness_property(model.sessions["Relay"], model.globals["G"], model.security, 5)
    assert rep.passed and rep.vacuous


def test_recursive_fixture_properties():
    model = load("ticker.ses")
    n, g, sec = model.sessions["Ticker"], model.globals["G"], model.security
    assert soundness_property(n, g, sec, 6).passed
    rep = subject_reduction_property(n, g, sec, 6)
    assert rep.passed and not rep.vacuous


def test_soundness_failure_carries_witness(monkeypatch):
    # Pretend the leaky relay is typable: the harness must then fail with the leak.
    model = load("relay.ses")
    n, g, sec = model.sessions["Relay"], model.globals["G"], model.security
    monkeypatch.setattr(properties, "check_session", lambda *_: SessionReport(True, [], []))
    rep = soundness_property(n, g, sec, 5)
    assert not rep.passed and rep.verdict == "FAIL"
    assert [str(m) for m in rep.witness] == ['p -> q : l("v"^{top,phi})', 'q -> r : m("u"^{bot,phi})']


def test_implementations_check_against_projections():
    rng = random.Random(3)
    checked = 0
    for _ in range(150):
        inst = random_instance(rng)
        sec = inst.security
        for who in sorted(participants(inst.global_type)):
            t = project(inst.global_type, who)
            if not safe_type(t, sec):
                continue
            check_process(EMPTY, implement(rng, t, sec), t, sec)
            checked += 1
    assert checked > 200


def test_generator_hits_interesting_cases():
    rng = random.Random(11)
    typable = untypable = recursive = 0
    for _ in range(150):
        inst = random_instance(rng)
        ok = check_session(inst.session, inst.global_type, inst.security).ok
        typable += ok
        untypable += not ok
        recursive += ok and "rec" in str(inst.global_type)
    assert typable > 50 and untypable > 10 and recursive > 5


def test_theorem_suite_small():
    result = run_theorem_suite(60, seed=5)
    assert result.passed and result.typable > 20


def test_empty_global():
    sec = security()
    assert subtype(END, project(END, "p"))
    assert soundness_property(Session.of(("p", INACT)), END, sec, 3).passed
