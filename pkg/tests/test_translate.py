import random

import pytest

from gen import random_tcsd_source
from virtint import model, parser, tapn, translate
from virtint.model import (Event, Message, SequenceDiagram, Tcsd, Timeout)
from virtint.translate import TranslationError


def _unit(src):
    checked = model.validate(parser.parse_tcsd(src).tcsd)
    assert checked.ok, checked.violations
    return translate.translate(checked.tcsd)


def test_message_chain_shape():
    unit = _unit("tcsd T { sut S test A "
                 "msg A -> S : x msg S -> A : y msg A -> S : z at 4 }")
    labels = [t.label for t in unit.net.transitions if t.label]
    assert labels == ["x", "y", "z"]
    # start + implicit time-0 partition + three messages + closing partition
    assert len(unit.net.transitions) == 6
    # Everything after the start step travels on transport arcs.
    assert len(unit.net.transport_arcs) == 5
    assert len(unit.net.input_arcs) == 1
    assert len(unit.net.output_arcs) == 1


def test_empty_diagram_net():
    unit = _unit("tcsd T { sut S test A }")
    assert len(unit.net.places) == 3
    assert len(unit.net.transitions) == 2
    guards = [a.guard for a in unit.net.transport_arcs]
    assert [str(g) for g in guards] == ["[0,0]"]
    assert sum(len(v) for v in unit.m0.values()) == 1
    assert list(unit.target.values()) == [1]
    res = tapn.reachable(unit.net, unit.m0, unit.target)
    assert res.verdict == "reachable"
    assert sum(s.delay for s in res.trace) == 0


def test_partition_at_zero_gets_exact_zero_guard():
    unit = _unit("tcsd T { sut S test A at 0 msg A -> S : x }")
    partition_steps = [a for a in unit.net.transport_arcs
                       if a.guard.lower == 0 and a.guard.upper == 0]
    assert len(partition_steps) == 1


def test_structural_report_counts():
    unit = _unit("tcsd T { sut S test A "
                 "msg A -> S : a msg S -> A : b msg A -> S : c at 3 at 9 }")
    rep = translate.structural_report(unit)
    assert rep.labeled_transitions == 3
    # Two explicit partitions plus the implicit one at time 0.
    assert rep.transition_counts["partition"] == 3
    assert rep.transition_counts["start"] == 1
    assert rep.transition_counts["message"] == 3
    assert rep.branch_depth == 0
    assert rep.c_max == 9


def test_par_fragment_branches():
    unit = _unit("tcsd T { sut S test A "
                 "par { op { msg A -> S : a } op { msg A -> S : b } } }")
    kinds = unit.transition_kinds
    [tfs] = [t for t, k in kinds.items() if k == "fragment-enter"]
    [tfe] = [t for t, k in kinds.items() if k == "fragment-exit"]
    branch_outs = [a for a in unit.net.output_arcs if a.transition == tfs]
    assert len(branch_outs) == 2
    # The exit joins the main token plus one token per operand.
    rejoin_normal = [a for a in unit.net.input_arcs if a.transition == tfe]
    rejoin_transport = [a for a in unit.net.transport_arcs if a.transition == tfe]
    assert len(rejoin_normal) == 2
    assert len(rejoin_transport) == 1
    rep = translate.structural_report(unit)
    assert rep.branch_depth == 1


def test_loop_zero_keeps_border_transitions():
    unit = _unit("tcsd T { sut S test A loop 0 { msg A -> S : a } }")
    kinds = unit.transition_kinds
    assert "fragment-enter" in kinds.values()
    assert "fragment-exit" in kinds.values()
    assert all(t.label is None for t in unit.net.transitions)
    [tfs] = [t for t, k in kinds.items() if k == "fragment-enter"]
    [tfe] = [t for t, k in kinds.items() if k == "fragment-exit"]
    [branch] = [a.place for a in unit.net.output_arcs if a.transition == tfs]
    assert any(a.place == branch and a.transition == tfe
               for a in unit.net.input_arcs)
    res = tapn.reachable(unit.net, unit.m0, unit.target)
    assert res.verdict == "reachable"


def test_loop_unrolls_body():
    unit = _unit("tcsd T { sut S test A loop 3 { msg S -> A : st } }")
    labels = [t.label for t in unit.net.transitions if t.label == "st"]
    assert len(labels) == 3
    tcsd = unit.tcsd
    send = next(m.send for m in tcsd.base.messages)
    assert len(unit.event_map[send]) == 3
    res = tapn.reachable(unit.net, unit.m0, unit.target)
    assert res.verdict == "reachable"
    assert sum(1 for s in res.trace if s.label == "st") == 3


def test_alt_encoded_like_par():
    par = _unit("tcsd T { sut S test A "
                "par { op { msg A -> S : a } op { msg A -> S : b } } }")
    alt = _unit("tcsd T { sut S test A "
                "alt { op { msg A -> S : a } op { msg A -> S : b } } }")
    assert par.net == alt.net


def test_strict_fragment_adds_nothing():
    plain = _unit("tcsd T { sut S test A msg A -> S : a msg S -> A : b }")
    strict = _unit("tcsd T { sut S test A strict { msg A -> S : a msg S -> A : b } }")
    assert len(plain.net.transitions) == len(strict.net.transitions)
    assert [t.label for t in plain.net.transitions] == \
        [t.label for t in strict.net.transitions]


def test_timeout_shares_anchor_transition():
    unit = _unit("tcsd T { sut S test A "
                 "timeout 5 { msg A -> S : go msg S -> A : done } }")
    assert len(unit.wait_places) == 1
    [wait] = unit.wait_places
    feeder = [a for a in unit.net.output_arcs if a.place == wait]
    drain = [a for a in unit.net.input_arcs if a.place == wait]
    assert len(feeder) == 1 and len(drain) == 1
    assert unit.net.label_of(feeder[0].transition) == "go"
    assert unit.net.label_of(drain[0].transition) == "done"
    assert str(drain[0].guard) == "[0,5]"


def test_timeout_window_enforced():
    unit = _unit("tcsd T { sut S test A "
                 "timeout 2 { msg A -> S : go msg S -> A : done } at 9 }")
    res = tapn.reachable(unit.net, unit.m0, unit.target)
    assert res.verdict == "reachable"
    steps = {s.label: i for i, s in enumerate(res.trace) if s.label}
    elapsed = sum(s.delay for s in res.trace[steps["go"] + 1:steps["done"] + 1])
    assert elapsed <= 2


def test_nested_timeouts_supported():
    unit = _unit("tcsd T { sut S test A timeout 9 { msg A -> S : a "
                 "timeout 3 { msg A -> S : b msg A -> S : c } msg S -> A : d } }")
    assert len(unit.wait_places) == 2


def test_overlapping_timeouts_rejected():
    events = {
        "S": tuple(Event("s%d" % n, "S", "send") for n in range(4)),
        "A": tuple(Event("r%d" % n, "A", "receive") for n in range(4)),
    }
    msgs = tuple(Message("s%d" % n, "m%d" % n, "r%d" % n) for n in range(4))
    sd = SequenceDiagram("X", ("S", "A"), events, msgs, ())
    tcsd = Tcsd(sd, "S", (), (Timeout("s0", "s2", 5), Timeout("s1", "s3", 5)))
    checked = model.validate(tcsd)
    assert checked.ok
    with pytest.raises(TranslationError):
        translate.translate(checked.tcsd)


def test_chained_timeouts_allowed():
    events = {
        "S": tuple(Event("s%d" % n, "S", "send") for n in range(3)),
        "A": tuple(Event("r%d" % n, "A", "receive") for n in range(3)),
    }
    msgs = tuple(Message("s%d" % n, "m%d" % n, "r%d" % n) for n in range(3))
    sd = SequenceDiagram("X", ("S", "A"), events, msgs, ())
    tcsd = Tcsd(sd, "S", (), (Timeout("s0", "s1", 5), Timeout("s1", "s2", 5)))
    unit = translate.translate(model.validate(tcsd).tcsd)
    # The shared anchor consumes the first wait token and feeds the second.
    shared = [t.id for t in unit.net.transitions if t.label == "m1"]
    assert len(shared) == 1


def test_one_safety_without_fragments():
    unit = _unit("tcsd T { sut S test A msg A -> S : x at 3 msg S -> A : y }")
    for t in unit.net.transitions:
        incoming = tapn.incoming_arcs(unit.net, t.id)
        outgoing = [a for a in unit.net.output_arcs if a.transition == t.id]
        outgoing_t = [a for a in unit.net.transport_arcs if a.transition == t.id]
        assert len(incoming) == 1
        assert len(outgoing) + len(outgoing_t) == 1
    res = tapn.reachable(unit.net, unit.m0, unit.target)
    m = unit.m0
    assert sum(len(v) for v in m.values()) == 1
    for step in res.trace:
        m = tapn.fire(unit.net, tapn.delay(m, step.delay), step.transition,
                      [age if age is not None else next(iter(
                          tapn.delay(m, step.delay)[place]))
                       for place, age in step.consumed])
        assert sum(len(v) for v in m.values()) == 1


def test_main_token_age_tracks_time_since_start():
    unit = _unit("tcsd T { sut S test A msg A -> S : x at 3 "
                 "msg S -> A : y at 7 msg A -> S : z }")
    res = tapn.reachable(unit.net, unit.m0, unit.target)
    assert res.verdict == "reachable"
    elapsed = None
    for step in res.trace:
        if elapsed is not None:
            elapsed += step.delay
        if unit.transition_kinds[step.transition] == "start":
            elapsed = 0
            continue
        known = [age for _, age in step.consumed if age is not None]
        for age in known:
            assert age == elapsed
    assert elapsed == 7


def test_translate_deterministic():
    src = "tcsd T { sut S test A par { op { msg A -> S : a } " \
          "op { msg A -> S : b } } at 2 }"
    u1 = _unit(src)
    u2 = _unit(src)
    assert u1.net == u2.net
    assert u1.m0 == u2.m0
    assert u1.target == u2.target
    assert u1.event_map == u2.event_map


def test_solo_nets_always_feasible_sample():
    rng = random.Random(4242)
    for n in range(15):
        src = random_tcsd_source(rng, "F%d" % n)
        unit = _unit(src)
        res = tapn.reachable(unit.net, unit.m0, unit.target)
        assert res.verdict == "reachable", src
