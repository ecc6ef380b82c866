import random

import pytest

from gen import random_tcsd_source
from virtint import model, parser
from virtint.model import (Event, Fragment, Message, Operand, PartitionLine,
                           SequenceDiagram, Tcsd)


def _parse(src):
    return parser.parse_tcsd(src).tcsd


def test_duplicate_partition_timestamp_violates_uniqueness():
    raw = _parse("tcsd T { sut S test A msg A -> S : x at 5 at 5 }")
    res = model.validate(raw)
    assert not res.ok
    assert {v.clause for v in res.violations} == {"uniqueness"}


def test_empty_diagram_is_valid():
    raw = _parse("tcsd T { sut S test A }")
    res = model.validate(raw)
    assert res.ok
    # Normalization adds the implicit start partition.
    assert [p.timestamp for p in res.tcsd.partitions] == [0]


def test_two_fragment_cycle_is_self_nesting():
    events = {
        "S": (Event("en_f", "S", "fragment-enter", "f"),
              Event("en_g", "S", "fragment-enter", "g"),
              Event("s1", "S", "send"),
              Event("ex_g", "S", "fragment-exit", "g"),
              Event("ex_f", "S", "fragment-exit", "f")),
        "A": (Event("r1", "A", "receive"),),
    }
    sd = SequenceDiagram("Cyc", ("S", "A"), events,
                         (Message("s1", "x", "r1"),),
                         (Fragment("f", "opt", (Operand(("en_g", "s1", "r1", "ex_g"), ("g",)),)),
                          Fragment("g", "opt", (Operand(("s1", "r1"), ("f",)),))))
    res = model.validate(Tcsd(sd, "S", (), ()))
    assert "no-self-nesting" in {v.clause for v in res.violations}


def test_validate_is_pure_and_idempotent():
    raw = _parse("tcsd T { sut S test A msg A -> S : x at 5 at 5 }")
    first = model.validate(raw)
    second = model.validate(raw)
    assert first.violations == second.violations

    ok = model.validate(_parse("tcsd T { sut S test A msg A -> S : x }"))
    again = model.validate(ok.tcsd)
    assert again.ok
    assert again.tcsd == ok.tcsd


def test_explicit_time_zero_partition_is_not_duplicated():
    raw = _parse("tcsd T { sut S test A at 0 msg A -> S : x }")
    res = model.validate(raw)
    assert res.ok
    assert [p.timestamp for p in res.tcsd.partitions] == [0]


def test_partition_timestamps_ascend_and_start_at_zero():
    rng = random.Random(42)
    for n in range(25):
        raw = _parse(random_tcsd_source(rng, "P%d" % n))
        res = model.validate(raw)
        assert res.ok, res.violations
        stamps = [p.timestamp for p in res.tcsd.partitions]
        assert stamps[0] == 0
        assert stamps == sorted(stamps)
        assert len(set(stamps)) == len(stamps)


def test_every_message_has_exactly_one_sut_endpoint():
    rng = random.Random(43)
    for n in range(25):
        res = model.validate(_parse(random_tcsd_source(rng, "M%d" % n)))
        assert res.ok
        tcsd = res.tcsd
        on_sut = {e.id for e in tcsd.base.events[tcsd.sut]}
        for m in tcsd.base.messages:
            assert len({m.send, m.receive} & on_sut) == 1


def test_dangling_reference_reports_malformed_only():
    sd = SequenceDiagram("B", ("S", "A"),
                         {"S": (Event("s1", "S", "send"),), "A": ()},
                         (Message("s1", "x", "ghost"),), ())
    res = model.validate(Tcsd(sd, "S", (), ()))
    assert not res.ok
    assert {v.clause for v in res.violations} == {"malformed"}


def test_sut_walk_total_order():
    res = model.validate(_parse(
        "tcsd T { sut S test A msg A -> S : a msg S -> A : b msg A -> S : c }"))
    walk = model.sut_walk(res.tcsd)
    kinds = [e.kind for e in walk.events]
    assert kinds == ["partition", "receive", "send", "receive"]
    assert walk.next(walk.events[-1].id) is None
    assert walk.next(walk.events[0].id) == walk.events[1]


def test_sut_walk_visits_operands_sequentially():
    res = model.validate(_parse(
        "tcsd T { sut S test A par { op { msg A -> S : a } op { msg A -> S : b } } }"))
    tcsd = res.tcsd
    walk = model.sut_walk(tcsd)
    kinds = [e.kind for e in walk.events]
    assert kinds == ["partition", "fragment-enter", "receive", "receive",
                     "fragment-exit"]
    frag = tcsd.base.fragments[0]
    assert walk.first(frag.id, 0).id != walk.first(frag.id, 1).id
    assert walk.last(frag.id, 1) == walk.events[3]


def test_sut_walk_nested_fragment_visited_inside_outer_operand():
    res = model.validate(_parse(
        "tcsd T { sut S test A alt {"
        " op { msg A -> S : a }"
        " op { par { op { msg A -> S : b } op { msg A -> S : c } } msg A -> S : d }"
        " } }"))
    walk = model.sut_walk(res.tcsd)
    labels = []
    msg_by_event = {m.receive: m.label for m in res.tcsd.base.messages}
    for e in walk.events:
        labels.append(msg_by_event.get(e.id, e.kind[:5]))
    assert labels == ["parti", "fragm", "a", "fragm", "b", "c", "fragm", "d",
                      "fragm"]


def test_sut_walk_covers_each_sut_event_once():
    rng = random.Random(44)
    for n in range(25):
        res = model.validate(_parse(random_tcsd_source(rng, "W%d" % n)))
        tcsd = res.tcsd
        walk = model.sut_walk(tcsd)
        line = tcsd.base.events[tcsd.sut]
        assert [e.id for e in walk.events] == [e.id for e in line]


def test_interleaved_operands_rejected_as_layout():
    events = {
        "S": (Event("en", "S", "fragment-enter", "f"),
              Event("s1", "S", "send"),
              Event("s2", "S", "send"),
              Event("s3", "S", "send"),
              Event("ex", "S", "fragment-exit", "f")),
        "A": (Event("r1", "A", "receive"), Event("r2", "A", "receive"),
              Event("r3", "A", "receive")),
    }
    sd = SequenceDiagram("L", ("S", "A"), events,
                         (Message("s1", "x", "r1"), Message("s2", "y", "r2"),
                          Message("s3", "z", "r3")),
                         (Fragment("f", "par",
                                   (Operand(("s1", "s3", "r1", "r3")),
                                    Operand(("s2", "r2")))),))
    res = model.validate(Tcsd(sd, "S", (), ()))
    assert "fragment-layout" in {v.clause for v in res.violations}


def test_timeout_spanning_partition_rejected():
    events = {
        "S": (Event("s1", "S", "send"), Event("pS", "S", "partition"),
              Event("s2", "S", "send")),
        "A": (Event("r1", "A", "receive"), Event("pA", "A", "partition"),
              Event("r2", "A", "receive")),
    }
    sd = SequenceDiagram("TP", ("S", "A"), events,
                         (Message("s1", "x", "r1"), Message("s2", "y", "r2")), ())
    tcsd = Tcsd(sd, "S", (PartitionLine(("pS", "pA"), 4),),
                (model.Timeout("s1", "s2", 9),))
    res = model.validate(tcsd)
    assert "timeout-partition-span" in {v.clause for v in res.violations}


@pytest.mark.parametrize("operator,n_ops", [("par", 1), ("opt", 2), ("loop", 2)])
def test_operand_count_rule(operator, n_ops):
    ops = tuple(Operand(("s1", "r1")) for _ in range(n_ops))
    events = {
        "S": (Event("en", "S", "fragment-enter", "f"),
              Event("s1", "S", "send"),
              Event("ex", "S", "fragment-exit", "f")),
        "A": (Event("r1", "A", "receive"),),
    }
    sd = SequenceDiagram("O", ("S", "A"), events,
                         (Message("s1", "x", "r1"),),
                         (Fragment("f", operator, ops,
                                   loop_bound=2 if operator == "loop" else None),))
    res = model.validate(Tcsd(sd, "S", (), ()))
    assert "operand-count" in {v.clause for v in res.violations}
