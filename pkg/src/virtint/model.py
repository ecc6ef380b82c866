"""In-memory model of timed test-case sequence diagrams.

A diagram consists of instance lines (one of which is the system under
test), per-line ordered event lists, messages between a test line and the
SUT line, a forest of interaction fragments (strict/par/opt/alt/loop),
absolute-time partition lines and relative timeouts.  ``validate`` checks
every well-formedness clause and returns a normalized, immutable diagram;
``sut_walk`` exposes the SUT-line event order the translator consumes.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

SEND = "send"
RECEIVE = "receive"
FRAGMENT_ENTER = "fragment-enter"
FRAGMENT_EXIT = "fragment-exit"
PARTITION = "partition"

EVENT_KINDS = (SEND, RECEIVE, FRAGMENT_ENTER, FRAGMENT_EXIT, PARTITION)

OPERATORS = ("strict", "par", "opt", "alt", "loop")
# Operators whose enter/exit events become net transitions; strict adds nothing.
BRANCHING_OPERATORS = ("par", "opt", "alt", "loop")


@dataclass(frozen=True)
class Event:
    """One occurrence on an instance line."""

    id: str
    instance: str
    kind: str
    fragment: str | None = None  # set for fragment-enter/exit only


@dataclass(frozen=True)
class Message:
    send: str
    label: str
    receive: str


@dataclass(frozen=True)
class Operand:
    """One operand of a fragment: its events (all lines) and direct children."""

    events: tuple[str, ...]
    children: tuple[str, ...] = ()


@dataclass(frozen=True)
class Fragment:
    id: str
    operator: str
    operands: tuple[Operand, ...]
    loop_bound: int | None = None


@dataclass(frozen=True)
class PartitionLine:
    """A horizontal cut at absolute time ``timestamp``, one event per line."""

    events: tuple[str, ...]
    timestamp: int


@dataclass(frozen=True)
class Timeout:
    """At most ``bound`` ticks may pass between two SUT events."""

    start: str
    end: str
    bound: int


@dataclass(frozen=True)
class SequenceDiagram:
    name: str
    instances: tuple[str, ...]
    events: dict[str, tuple[Event, ...]]  # instance -> ordered event list
    messages: tuple[Message, ...]
    fragments: tuple[Fragment, ...]


@dataclass(frozen=True)
class Tcsd:
    base: SequenceDiagram
    sut: str
    partitions: tuple[PartitionLine, ...]
    timeouts: tuple[Timeout, ...]


@dataclass(frozen=True)
class Violation:
    clause: str
    elements: tuple[str, ...]
    detail: str

    def __str__(self):
        return "%s: %s [%s]" % (self.clause, self.detail, " ".join(self.elements))


@dataclass
class ValidationResult:
    violations: list[Violation]
    tcsd: Tcsd | None = None  # normalized diagram, present iff ok

    @property
    def ok(self) -> bool:
        return not self.violations


class LayoutError(Exception):
    """SUT-line events cannot be arranged into a fragment region tree."""


# --------------------------------------------------------------------------
# Region tree: the SUT line parsed into nested fragment operands.


@dataclass
class EventNode:
    event: Event


@dataclass
class FragmentNode:
    fragment: Fragment
    enter: Event
    exit: Event
    operand_items: list[list]  # one item list per operand


def _index_fragments(tcsd: Tcsd) -> dict[str, Fragment]:
    return {f.id: f for f in tcsd.base.fragments}


def _sut_events(tcsd: Tcsd) -> tuple[Event, ...]:
    return tcsd.base.events.get(tcsd.sut, ())


def _parse_items(events, i, j, frags) -> list:
    items = []
    k = i
    while k < j:
        e = events[k]
        if e.kind == FRAGMENT_EXIT:
            raise LayoutError("unmatched fragment exit %s" % e.id)
        if e.kind != FRAGMENT_ENTER:
            items.append(EventNode(e))
            k += 1
            continue
        frag = frags.get(e.fragment)
        if frag is None:
            raise LayoutError("enter event %s names unknown fragment" % e.id)
        end = None
        for n in range(k + 1, j):
            if events[n].kind == FRAGMENT_EXIT and events[n].fragment == frag.id:
                end = n
                break
        if end is None:
            raise LayoutError("fragment %s has no exit on the SUT line" % frag.id)
        membership = []
        for n in range(k + 1, end):
            inner = events[n]
            owners = [
                x
                for x, op in enumerate(frag.operands)
                if inner.id in set(op.events)
            ]
            if len(owners) != 1:
                raise LayoutError(
                    "event %s is in %d operands of fragment %s"
                    % (inner.id, len(owners), frag.id)
                )
            membership.append(owners[0])
        if membership != sorted(membership):
            raise LayoutError(
                "operands of fragment %s are interleaved on the SUT line" % frag.id
            )
        slices = []
        pos = k + 1
        for x in range(len(frag.operands)):
            lo = pos
            while pos < end and membership[pos - (k + 1)] == x:
                pos += 1
            slices.append((lo, pos))
        if pos != end:
            raise LayoutError("fragment %s has stray interior events" % frag.id)
        operand_items = [_parse_items(events, lo, hi, frags) for lo, hi in slices]
        items.append(FragmentNode(frag, e, events[end], operand_items))
        k = end + 1
    return items


def sut_regions(tcsd: Tcsd) -> list:
    """Parse the SUT line into the nested item tree used by the translator.

    Raises LayoutError when borders are unmatched or operands interleave;
    ``validate`` reports that as a ``fragment-layout`` violation.
    """
    events = _sut_events(tcsd)
    return _parse_items(events, 0, len(events), _index_fragments(tcsd))


def _flatten(items, out):
    for item in items:
        if isinstance(item, EventNode):
            out.append(item.event)
        else:
            out.append(item.enter)
            for op in item.operand_items:
                _flatten(op, out)
            out.append(item.exit)


class SutWalk:
    """Ordered cursor over the SUT-line events of a validated diagram."""

    def __init__(self, tcsd: Tcsd):
        self._items = sut_regions(tcsd)
        flat: list[Event] = []
        _flatten(self._items, flat)
        self.events: tuple[Event, ...] = tuple(flat)
        self._pos = {e.id: n for n, e in enumerate(self.events)}
        self._operand_spans: dict[tuple[str, int], tuple[Event, ...]] = {}
        self._collect_spans(self._items)

    def _collect_spans(self, items):
        for item in items:
            if isinstance(item, FragmentNode):
                for x, op_items in enumerate(item.operand_items):
                    flat: list[Event] = []
                    _flatten(op_items, flat)
                    self._operand_spans[(item.fragment.id, x)] = tuple(flat)
                    self._collect_spans(op_items)

    def __iter__(self):
        return iter(self.events)

    def next(self, event_id: str) -> Event | None:
        n = self._pos[event_id]
        return self.events[n + 1] if n + 1 < len(self.events) else None

    def first(self, fragment_id: str, operand: int) -> Event | None:
        span = self._operand_spans[(fragment_id, operand)]
        return span[0] if span else None

    def last(self, fragment_id: str, operand: int) -> Event | None:
        span = self._operand_spans[(fragment_id, operand)]
        return span[-1] if span else None


def sut_walk(tcsd: Tcsd) -> SutWalk:
    """Walk the SUT line in declared order (operands visited sequentially)."""
    return SutWalk(tcsd)


# --------------------------------------------------------------------------
# Validation.


def _add(violations, clause, elements, detail):
    violations.append(Violation(clause, tuple(elements), detail))


def _check_malformed(tcsd: Tcsd) -> list[Violation]:
    v: list[Violation] = []
    base = tcsd.base
    seen: dict[str, str] = {}
    for inst in base.instances:
        for e in base.events.get(inst, ()):
            if e.id in seen:
                _add(v, "malformed", [e.id], "duplicate event id")
            seen[e.id] = inst
            if e.instance != inst:
                _add(v, "malformed", [e.id], "event filed under wrong instance line")
            if e.kind not in EVENT_KINDS:
                _add(v, "malformed", [e.id], "unknown event kind %r" % e.kind)
    for inst in base.events:
        if inst not in base.instances:
            _add(v, "malformed", [inst], "event list for undeclared instance")
    if tcsd.sut not in base.instances:
        _add(v, "malformed", [tcsd.sut], "SUT is not a declared instance")

    frag_ids = {f.id for f in base.fragments}
    dup = set()
    for f in base.fragments:
        if f.id in dup:
            _add(v, "malformed", [f.id], "duplicate fragment id")
        dup.add(f.id)
        if f.operator not in OPERATORS:
            _add(v, "malformed", [f.id], "unknown operator %r" % f.operator)
        for op in f.operands:
            for eid in op.events:
                if eid not in seen:
                    _add(v, "malformed", [f.id, eid], "operand references unknown event")
            for cid in op.children:
                if cid not in frag_ids:
                    _add(v, "malformed", [f.id, cid], "operand references unknown fragment")
    for m in base.messages:
        for eid in (m.send, m.receive):
            if eid not in seen:
                _add(v, "malformed", [eid], "message endpoint is not an event")
    for p in tcsd.partitions:
        for eid in p.events:
            if eid not in seen:
                _add(v, "malformed", [eid], "partition references unknown event")
        if p.timestamp < 0:
            _add(v, "malformed", [str(p.timestamp)], "negative partition timestamp")
    for c in tcsd.timeouts:
        for eid in (c.start, c.end):
            if eid not in seen:
                _add(v, "malformed", [eid], "timeout endpoint is not an event")
        if c.bound < 1:
            _add(v, "malformed", [c.start, c.end], "timeout bound must be positive")
    for e_list in base.events.values():
        for e in e_list:
            if e.kind in (FRAGMENT_ENTER, FRAGMENT_EXIT) and e.fragment not in frag_ids:
                _add(v, "malformed", [e.id], "border event names unknown fragment")
    return v


def _descendants(fragments: tuple[Fragment, ...]) -> dict[str, set[str]]:
    children: dict[str, set[str]] = {}
    for f in fragments:
        kids = set()
        for op in f.operands:
            kids |= set(op.children)
        children[f.id] = kids
    out: dict[str, set[str]] = {}
    for f in fragments:
        reached: set[str] = set()
        frontier = set(children[f.id])
        while frontier:
            fid = frontier.pop()
            if fid in reached:
                continue
            reached.add(fid)
            frontier |= children.get(fid, set()) - reached
        out[f.id] = reached
    return out


def validate(tcsd: Tcsd) -> ValidationResult:
    """Check every well-formedness clause of a raw diagram.

    Dangling references are reported as ``malformed`` violations and block
    the semantic checks.  On success the result carries a normalized copy:
    partitions sorted by timestamp and the implicit start partition (time 0)
    inserted when absent.
    """
    malformed = _check_malformed(tcsd)
    if malformed:
        return ValidationResult(malformed)

    v: list[Violation] = []
    base = tcsd.base
    pos: dict[str, tuple[str, int]] = {}
    kind: dict[str, str] = {}
    for inst in base.instances:
        for n, e in enumerate(base.events[inst] if inst in base.events else ()):
            pos[e.id] = (inst, n)
            kind[e.id] = e.kind

    # Message endpoints: kinds match, no sharing, every send/receive used once.
    usage: dict[str, int] = {}
    for m in base.messages:
        usage[m.send] = usage.get(m.send, 0) + 1
        usage[m.receive] = usage.get(m.receive, 0) + 1
        if m.send == m.receive:
            _add(v, "message-endpoints", [m.send], "message with identical endpoints")
            continue
        if kind[m.send] != SEND:
            _add(v, "message-endpoints", [m.send], "send endpoint is not a send event")
        if kind[m.receive] != RECEIVE:
            _add(v, "message-endpoints", [m.receive], "receive endpoint is not a receive event")
        si, sn = pos[m.send]
        ri, rn = pos[m.receive]
        if si == ri and sn >= rn:
            _add(v, "message-order", [m.send, m.receive],
                 "same-line message must send before it receives")
    for eid, n in usage.items():
        if n > 1:
            _add(v, "message-endpoints", [eid], "event is an endpoint of %d messages" % n)
    for eid, k in kind.items():
        if k in (SEND, RECEIVE) and eid not in usage:
            _add(v, "message-endpoints", [eid], "%s event belongs to no message" % k)

    # Fragment shape: operand counts, loop bounds, empty operands.
    for f in base.fragments:
        n_ops = len(f.operands)
        if f.operator in ("strict", "opt", "loop") and n_ops != 1:
            _add(v, "operand-count", [f.id],
                 "%s requires exactly 1 operand, has %d" % (f.operator, n_ops))
        if f.operator in ("par", "alt") and n_ops < 2:
            _add(v, "operand-count", [f.id],
                 "%s requires at least 2 operands, has %d" % (f.operator, n_ops))
        if f.operator == "loop":
            if f.loop_bound is None:
                _add(v, "loop-bound", [f.id], "loop without a constant bound")
            elif f.loop_bound < 0:
                _add(v, "loop-bound", [f.id], "negative loop bound")
        elif f.loop_bound is not None:
            _add(v, "loop-bound", [f.id], "bound on a non-loop fragment")
        for x, op in enumerate(f.operands):
            if not op.events:
                _add(v, "empty-operand", [f.id], "operand %d is empty" % x)

    # Fragment consistency: self-nesting, shared events, containment.
    desc = _descendants(base.fragments)
    for f in base.fragments:
        if f.id in desc[f.id]:
            _add(v, "no-self-nesting", [f.id], "fragment is nested inside itself")
    frag_events = {
        f.id: set().union(*[set(op.events) for op in f.operands]) if f.operands else set()
        for f in base.fragments
    }
    frags = list(base.fragments)
    for a in range(len(frags)):
        for b in range(a + 1, len(frags)):
            f1, f2 = frags[a], frags[b]
            if f1.id in desc[f2.id] or f2.id in desc[f1.id]:
                continue
            shared = frag_events[f1.id] & frag_events[f2.id]
            if shared:
                _add(v, "no-shared-events", [f1.id, f2.id],
                     "disjoint fragments share events %s" % ",".join(sorted(shared)))
    by_id = {f.id: f for f in base.fragments}
    for f in base.fragments:
        for x, op in enumerate(f.operands):
            have = set(op.events)
            for cid in op.children:
                missing = frag_events[cid] - have
                if missing:
                    _add(v, "event-containment", [f.id, cid],
                         "operand %d misses nested events %s"
                         % (x, ",".join(sorted(missing))))

    # SUT-line layout must parse into a region tree (translation precondition).
    try:
        sut_regions(tcsd)
    except LayoutError as exc:
        _add(v, "fragment-layout", [tcsd.sut], str(exc))

    # Every message connects the SUT line with exactly one test line.
    for m in base.messages:
        ends_on_sut = sum(1 for eid in (m.send, m.receive) if pos[eid][0] == tcsd.sut)
        if ends_on_sut != 1:
            _add(v, "sut-endpoint", [m.send, m.receive],
                 "message %r has %d endpoints on the SUT line" % (m.label, ends_on_sut))

    # Partition lines.
    by_delta: dict[int, list[int]] = {}
    for n, p in enumerate(tcsd.partitions):
        by_delta.setdefault(p.timestamp, []).append(n)
    for delta, idxs in sorted(by_delta.items()):
        if len(idxs) > 1:
            elems = [e for n in idxs for e in tcsd.partitions[n].events]
            _add(v, "uniqueness", elems,
                 "%d partition lines share timestamp %d" % (len(idxs), delta))
    for p in tcsd.partitions:
        covered = {}
        for eid in p.events:
            inst = pos[eid][0]
            covered[inst] = covered.get(inst, 0) + 1
            if kind[eid] != PARTITION:
                _add(v, "completeness", [eid], "partition line uses a non-partition event")
        if set(covered) != set(base.instances) or any(n != 1 for n in covered.values()):
            _add(v, "completeness", list(p.events),
                 "partition at %d does not cut every line exactly once" % p.timestamp)
    part_of: dict[str, int] = {}
    for n, p in enumerate(tcsd.partitions):
        for eid in p.events:
            if eid in part_of:
                _add(v, "completeness", [eid], "event shared between partition lines")
            part_of[eid] = n
    ordered = sorted(tcsd.partitions, key=lambda p: p.timestamp)
    for a in range(len(ordered)):
        for b in range(a + 1, len(ordered)):
            p1, p2 = ordered[a], ordered[b]
            if p1.timestamp == p2.timestamp:
                continue
            for e1 in p1.events:
                i1, n1 = pos[e1]
                for e2 in p2.events:
                    i2, n2 = pos[e2]
                    if i1 == i2 and n1 >= n2:
                        _add(v, "ordering", [e1, e2],
                             "partition at %d is drawn after partition at %d on line %s"
                             % (p1.timestamp, p2.timestamp, i1))
    all_operand_events: dict[str, str] = {}
    for f in base.fragments:
        for op in f.operands:
            for eid in op.events:
                all_operand_events.setdefault(eid, f.id)
    for p in tcsd.partitions:
        for eid in p.events:
            if eid in all_operand_events:
                _add(v, "no-fragment-cutting", [eid, all_operand_events[eid]],
                     "partition event lies inside a fragment operand")

    # Timeouts.
    for c in tcsd.timeouts:
        si, sn = pos[c.start]
        ei, en = pos[c.end]
        if si != tcsd.sut or ei != tcsd.sut:
            _add(v, "timeout-endpoints", [c.start, c.end],
                 "timeout endpoints must lie on the SUT line")
            continue
        if sn >= en:
            _add(v, "timeout-ordered", [c.start, c.end],
                 "timeout start must precede its end")
        for f in base.fragments:
            for x, op in enumerate(f.operands):
                s_in = c.start in set(op.events)
                e_in = c.end in set(op.events)
                if s_in != e_in:
                    _add(v, "timeout-same-fragment", [c.start, c.end, f.id],
                         "endpoints split across operand %d of fragment %s" % (x, f.id))
        if kind[c.start] == PARTITION or kind[c.end] == PARTITION:
            _add(v, "timeout-partition-span", [c.start, c.end],
                 "timeout anchored on a partition event")
        else:
            sut_line = base.events[tcsd.sut]
            for e in sut_line[min(sn, en) + 1:max(sn, en)]:
                if e.kind == PARTITION:
                    _add(v, "timeout-partition-span", [c.start, c.end, e.id],
                         "timeout spans the partition event %s" % e.id)

    if v:
        return ValidationResult(v)
    return ValidationResult([], _normalize(tcsd))


def _normalize(tcsd: Tcsd) -> Tcsd:
    partitions = sorted(tcsd.partitions, key=lambda p: p.timestamp)
    if partitions and partitions[0].timestamp == 0:
        return replace(tcsd, partitions=tuple(partitions))
    base = tcsd.base
    taken = {e.id for evs in base.events.values() for e in evs}
    new_events = dict(base.events)
    tau_events = []
    for inst in base.instances:
        eid = "t0_%s" % inst
        while eid in taken:
            eid += "_"
        taken.add(eid)
        tau_events.append(eid)
        new_events[inst] = (Event(eid, inst, PARTITION),) + new_events.get(inst, ())
    tau0 = PartitionLine(tuple(tau_events), 0)
    return replace(
        tcsd,
        base=replace(base, events=new_events),
        partitions=(tau0,) + tuple(partitions),
    )
