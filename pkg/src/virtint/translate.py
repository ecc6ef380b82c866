"""Compile a validated diagram into a marked timed-arc Petri net.

The SUT line becomes one main sequence of transport-arc steps carrying a
clock token: an unguarded start step (so nets merged later may begin with
an arbitrary offset), one labeled step per message event, one ``[d,d]``
step per partition event.  par/alt/opt fragments branch one age-0 token
per operand between an enter and an exit transition; loops unroll their
single operand a constant number of times; strict fragments add nothing.
A timeout feeds a fresh token into a wait place at its start anchor and
drains it through a ``[0,d]`` guard at its end anchor.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import model, tapn
from .model import EventNode, FragmentNode, Tcsd
from .tapn import (ANY_AGE, Guard, InputArc, Marking, OutputArc, Tapn, TargetSpec,
                   Transition, TransportArc)

START = "start"
MESSAGE = "message"
PARTITION_STEP = "partition"
FRAGMENT_ENTER = "fragment-enter"
FRAGMENT_EXIT = "fragment-exit"


class TranslationError(Exception):
    pass


@dataclass
class TranslationUnit:
    tcsd: Tcsd | None  # None for merged units
    net: Tapn
    m0: Marking
    target: TargetSpec
    event_map: dict[str, tuple[str, ...]]  # SUT event -> its transitions
    transition_kinds: dict[str, str]
    wait_places: frozenset[str]

    @property
    def name(self) -> str:
        return self.net.name

    @property
    def label_map(self) -> dict[str, str | None]:
        return {t.id: t.label for t in self.net.transitions}


class _Builder:
    def __init__(self, name: str):
        self.prefix = name
        self.places: list[str] = []
        self.transitions: list[Transition] = []
        self.input_arcs: list[InputArc] = []
        self.output_arcs: list[OutputArc] = []
        self.transport_arcs: list[TransportArc] = []
        self.kinds: dict[str, str] = {}
        self.waits: set[str] = set()

    def place(self) -> str:
        pid = "%s.P%d" % (self.prefix, len(self.places))
        self.places.append(pid)
        return pid

    def transition(self, label: str | None, kind: str) -> str:
        tid = "%s.T%d" % (self.prefix, len(self.transitions))
        self.transitions.append(Transition(tid, label))
        self.kinds[tid] = kind
        return tid

    def net(self) -> Tapn:
        return Tapn(
            name=self.prefix,
            places=tuple(self.places),
            transitions=tuple(self.transitions),
            input_arcs=tuple(self.input_arcs),
            output_arcs=tuple(self.output_arcs),
            transport_arcs=tuple(self.transport_arcs),
        )


def _check_timeout_shape(tcsd: Tcsd, walk: model.SutWalk):
    pos = {e.id: n for n, e in enumerate(walk.events)}
    spans = []
    for c in tcsd.timeouts:
        spans.append((pos[c.start], pos[c.end], c))
    for i in range(len(spans)):
        for j in range(i + 1, len(spans)):
            s1, e1, c1 = spans[i]
            s2, e2, c2 = spans[j]
            if e1 <= s2 or e2 <= s1:
                continue  # disjoint or chained at one event
            if (s1 <= s2 and e2 <= e1) or (s2 <= s1 and e1 <= e2):
                continue  # properly nested
            raise TranslationError(
                "timeouts %s..%s and %s..%s overlap without nesting"
                % (c1.start, c1.end, c2.start, c2.end))


def translate(tcsd: Tcsd) -> TranslationUnit:
    """Build the net, its initial marking and its target for one diagram.

    Expects the normalized diagram produced by ``model.validate``; the
    construction is a deterministic fold over the SUT walk, so identical
    inputs yield identical nets.
    """
    walk = model.sut_walk(tcsd)
    _check_timeout_shape(tcsd, walk)

    base = tcsd.base
    msg_by_event = {}
    for m in base.messages:
        msg_by_event[m.send] = m
        msg_by_event[m.receive] = m
    delta_by_event = {}
    for p in tcsd.partitions:
        for eid in p.events:
            delta_by_event[eid] = p.timestamp
    starts: dict[str, list[int]] = {}
    ends: dict[str, list[int]] = {}
    for n, c in enumerate(tcsd.timeouts):
        starts.setdefault(c.start, []).append(n)
        ends.setdefault(c.end, []).append(n)

    b = _Builder(base.name)
    event_map: dict[str, list[str]] = {}
    open_waits: dict[int, str] = {}

    def attach(event_id: str, tid: str):
        event_map.setdefault(event_id, []).append(tid)
        for n in ends.get(event_id, ()):
            if n not in open_waits:
                raise TranslationError(
                    "timeout ending at %s was never started" % event_id)
            wait = open_waits.pop(n)
            b.input_arcs.append(InputArc(wait, tid, tapn.at_most(tcsd.timeouts[n].bound)))
        for n in starts.get(event_id, ()):
            wait = b.place()
            b.waits.add(wait)
            b.output_arcs.append(OutputArc(tid, wait))
            open_waits[n] = wait

    def transport_step(p: str, label: str | None, kind: str, guard: Guard) -> tuple[str, str]:
        t = b.transition(label, kind)
        p2 = b.place()
        b.transport_arcs.append(TransportArc(p, t, p2, guard))
        return t, p2

    def emit_items(items, p: str, in_branch: bool = False) -> str:
        for item in items:
            if isinstance(item, EventNode):
                e = item.event
                if e.kind in (model.SEND, model.RECEIVE):
                    msg = msg_by_event.get(e.id)
                    if msg is None:
                        raise TranslationError("message event %s has no message" % e.id)
                    t, p = transport_step(p, msg.label, MESSAGE, ANY_AGE)
                    attach(e.id, t)
                elif e.kind == model.PARTITION:
                    if in_branch:
                        # Branch tokens carry no global clock; the validator
                        # rejects partitions inside operands before this.
                        raise TranslationError(
                            "partition event %s inside a fragment operand" % e.id)
                    d = delta_by_event.get(e.id)
                    if d is None:
                        raise TranslationError("partition event %s has no line" % e.id)
                    t, p = transport_step(p, None, PARTITION_STEP, tapn.exact(d))
                    attach(e.id, t)
                else:
                    raise TranslationError("unexpected %s event %s on the SUT walk"
                                           % (e.kind, e.id))
                continue
            f = item.fragment
            if f.operator == "strict":
                for eid in (item.enter.id, item.exit.id):
                    if eid in starts or eid in ends:
                        raise TranslationError(
                            "timeout anchored on strict fragment border %s" % eid)
                p = emit_items(item.operand_items[0], p, in_branch)
                continue
            tfs, pmid = transport_step(p, None, FRAGMENT_ENTER, ANY_AGE)
            attach(item.enter.id, tfs)
            tfe = b.transition(None, FRAGMENT_EXIT)
            pend = b.place()
            b.transport_arcs.append(TransportArc(pmid, tfe, pend, ANY_AGE))
            if f.operator == "loop":
                if f.loop_bound is None:
                    raise TranslationError("loop %s has no constant bound" % f.id)
                branch = b.place()
                b.output_arcs.append(OutputArc(tfs, branch))
                cur = branch
                for _ in range(f.loop_bound):
                    cur = emit_items(item.operand_items[0], cur, True)
                b.input_arcs.append(InputArc(cur, tfe, ANY_AGE))
            else:
                for op_items in item.operand_items:
                    branch = b.place()
                    b.output_arcs.append(OutputArc(tfs, branch))
                    cur = emit_items(op_items, branch, True)
                    b.input_arcs.append(InputArc(cur, tfe, ANY_AGE))
            attach(item.exit.id, tfe)
            p = pend
        return p

    p_pre = b.place()
    t_start = b.transition(None, START)
    p0 = b.place()
    b.input_arcs.append(InputArc(p_pre, t_start, ANY_AGE))
    b.output_arcs.append(OutputArc(t_start, p0))

    final = emit_items(model.sut_regions(tcsd), p0)
    if open_waits:
        raise TranslationError("timeouts %s never reached their end anchor"
                               % sorted(open_waits))

    net = b.net()
    net.check()
    return TranslationUnit(
        tcsd=tcsd,
        net=net,
        m0={p_pre: (0,)},
        target={final: 1},
        event_map={k: tuple(v) for k, v in event_map.items()},
        transition_kinds=dict(b.kinds),
        wait_places=frozenset(b.waits),
    )


@dataclass
class StructuralReport:
    transition_counts: dict[str, int]  # per construction kind
    labeled_transitions: int
    branch_depth: int
    c_max: int


def structural_report(tu: TranslationUnit) -> StructuralReport:
    counts: dict[str, int] = {}
    for kind in tu.transition_kinds.values():
        counts[kind] = counts.get(kind, 0) + 1
    labeled = sum(1 for t in tu.net.transitions if t.label is not None)

    def depth(items):
        best = 0
        for item in items:
            if isinstance(item, FragmentNode):
                inner = 1 + max((depth(op) for op in item.operand_items), default=0)
                best = max(best, inner)
        return best

    return StructuralReport(
        transition_counts=counts,
        labeled_transitions=labeled,
        branch_depth=depth(model.sut_regions(tu.tcsd)),
        c_max=tapn.max_guard_constant(tu.net),
    )
