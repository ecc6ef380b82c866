"""Merge per-component nets and decide whether their test cases can agree.

Instance lines are mapped onto architecture components; two message
occurrences are compatible when their labels match and their sender and
receiver lines map to the same components.  Compatible transitions are
merged pairwise, every maximum matching of same-class occurrences is
tried, and each merged net is checked for reachability of the union
target.  An unreachable target is classified by relaxing all guards:
still unreachable means the message orders themselves conflict, reachable
means only the timing does.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace

from . import tapn
from .model import Tcsd
from .parser import Architecture
from .tapn import Tapn, TraceStep, Transition
from .translate import TranslationUnit

CONSISTENT = "consistent"
ORDERING_DEADLOCK = "ordering-deadlock"
TIMING_CONFLICT = "timing-conflict"
BOUND_EXCEEDED = "bound-exceeded"

MAXIMAL = "maximal"
STRICT = "strict"


class IntegrationError(Exception):
    pass


@dataclass(frozen=True)
class InstanceMap:
    """Total map from (diagram, instance line) to architecture component."""

    relation: dict[tuple[str, str], str]
    sut_components: dict[str, str]

    def component_of(self, tcsd_name: str, instance: str) -> str:
        try:
            return self.relation[(tcsd_name, instance)]
        except KeyError:
            raise IntegrationError(
                "instance %r of %r is not bound to a component" % (instance, tcsd_name)
            ) from None


def build_instance_map(arch: Architecture, tcsds: list[Tcsd]) -> InstanceMap:
    relation: dict[tuple[str, str], str] = {}
    suts: dict[str, str] = {}
    for tcsd in tcsds:
        name = tcsd.base.name
        binding = arch.bindings.get(name)
        if binding is None:
            raise IntegrationError("no binding for diagram %r in architecture %s"
                                   % (name, arch.name))
        relation[(name, tcsd.sut)] = binding.sut_component
        suts[name] = binding.sut_component
        for inst in tcsd.base.instances:
            if inst == tcsd.sut:
                continue
            comp = binding.instance_map.get(inst)
            if comp is None:
                raise IntegrationError(
                    "instance %r of %r is not bound to a component" % (inst, name))
            relation[(name, inst)] = comp
    return InstanceMap(relation, suts)


@dataclass(frozen=True)
class MessageOccurrence:
    tcsd: str
    sender_instance: str
    label: str
    receiver_instance: str


def compatible(m1: MessageOccurrence, m2: MessageOccurrence, imap: InstanceMap) -> bool:
    """True when both endpoints map to the same components and labels match."""
    if m1.tcsd == m2.tcsd:
        raise ValueError("compatibility is defined across distinct diagrams")
    if m1.label != m2.label:
        return False
    return (imap.component_of(m1.tcsd, m1.sender_instance)
            == imap.component_of(m2.tcsd, m2.sender_instance)
            and imap.component_of(m1.tcsd, m1.receiver_instance)
            == imap.component_of(m2.tcsd, m2.receiver_instance))


@dataclass(frozen=True)
class SyncMatching:
    pairs: tuple[tuple[str, str], ...]


def _occurrence_triples(unit: TranslationUnit, imap: InstanceMap):
    """Map each labeled transition to (sender comp, label, receiver comp)."""
    tcsd = unit.tcsd
    name = tcsd.base.name
    owner = {e.id: inst for inst, evs in tcsd.base.events.items() for e in evs}
    msg_by_event = {}
    for m in tcsd.base.messages:
        msg_by_event[m.send] = m
        msg_by_event[m.receive] = m
    event_of = {}
    for eid, tids in unit.event_map.items():
        for tid in tids:
            event_of[tid] = eid
    triples: dict[str, tuple[str, str, str]] = {}
    for t in unit.net.transitions:
        if t.label is None:
            continue
        msg = msg_by_event[event_of[t.id]]
        triples[t.id] = (
            imap.component_of(name, owner[msg.send]),
            msg.label,
            imap.component_of(name, owner[msg.receive]),
        )
    return triples


def _group_by_triple(triples: dict[str, tuple[str, str, str]]):
    groups: dict[tuple[str, str, str], list[str]] = {}
    for tid, triple in triples.items():
        groups.setdefault(triple, []).append(tid)
    for tids in groups.values():
        tids.sort()
    return groups


def enumerate_matchings(units: list[TranslationUnit], imap: InstanceMap,
                        policy: str = MAXIMAL):
    """Yield every combination of synchronization points, deterministically.

    Per unit pair and per compatible occurrence class, all maximum
    injective matchings are produced and combined by cartesian product.
    ``strict`` requires equal occurrence counts for every class whose
    endpoints are the pair's two components and errors otherwise;
    ``maximal`` leaves surplus occurrences free-firing.
    """
    if policy not in (MAXIMAL, STRICT):
        raise ValueError("unknown policy %r" % policy)
    if len(units) < 2:
        raise IntegrationError("virtual integration needs at least two diagrams")
    groups = [_group_by_triple(_occurrence_triples(u, imap)) for u in units]
    class_options: list[list[tuple[tuple[str, str], ...]]] = []
    for i in range(len(units)):
        for j in range(i + 1, len(units)):
            ga, gb = groups[i], groups[j]
            if policy == STRICT:
                comp_i = imap.sut_components[units[i].tcsd.base.name]
                comp_j = imap.sut_components[units[j].tcsd.base.name]
                unmatched = []
                for triple in sorted(set(ga) | set(gb)):
                    s, _, r = triple
                    if {s, r} != {comp_i, comp_j}:
                        continue
                    na, nb = len(ga.get(triple, ())), len(gb.get(triple, ()))
                    if na != nb:
                        unmatched.append("%s (%d vs %d)" % (triple[1], na, nb))
                if unmatched:
                    raise IntegrationError(
                        "unmatched message occurrences between %s and %s: %s"
                        % (units[i].name, units[j].name, ", ".join(unmatched)))
            for triple in sorted(set(ga) & set(gb)):
                a, b = ga[triple], gb[triple]
                if len(a) <= len(b):
                    options = [tuple(zip(a, perm))
                               for perm in itertools.permutations(b, len(a))]
                else:
                    options = [tuple(zip(perm, b))
                               for perm in itertools.permutations(a, len(b))]
                class_options.append(options)
    for combo in itertools.product(*class_options):
        pairs = tuple(sorted(pair for part in combo for pair in part))
        yield SyncMatching(pairs)


def merge(units: list[TranslationUnit], matching: SyncMatching) -> TranslationUnit:
    """Disjoint union of the nets with matched transition pairs collapsed.

    Every matched pair is replaced by one transition carrying the shared
    label; all arcs of both originals are redirected to it, guards kept.
    The result is canonical (elements sorted by id), so the merge order
    of the units does not matter.
    """
    names = [u.name for u in units]
    if len(set(names)) != len(names):
        raise IntegrationError("duplicate diagram names: %s" % names)
    by_tid: dict[str, Transition] = {}
    for u in units:
        for t in u.net.transitions:
            if t.id in by_tid:
                raise IntegrationError("transition id %s appears in two nets" % t.id)
            by_tid[t.id] = t

    parent: dict[str, str] = {}

    def find(x):
        while parent.get(x, x) != x:
            parent[x] = parent.get(parent[x], parent[x])
            x = parent[x]
        return x

    for a, b in matching.pairs:
        for tid in (a, b):
            if tid not in by_tid:
                raise IntegrationError("matching references unknown transition %s" % tid)
            if by_tid[tid].label is None:
                raise IntegrationError("matching references unlabeled transition %s" % tid)
        if by_tid[a].label != by_tid[b].label:
            raise IntegrationError("matched transitions %s and %s have different labels"
                                   % (a, b))
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    used = [tid for pair in matching.pairs for tid in pair]
    if len(used) != len(set(used)):
        raise IntegrationError("matching is not injective: %s" % sorted(used))

    members: dict[str, list[str]] = {}
    for tid in used:
        members.setdefault(find(tid), []).append(tid)
    rename: dict[str, str] = {}
    merged_transitions: list[Transition] = []
    for root, tids in members.items():
        tids = sorted(set(tids))
        mid = "+".join(tids)
        for tid in tids:
            rename[tid] = mid
        merged_transitions.append(Transition(mid, by_tid[tids[0]].label))

    transitions = list(merged_transitions)
    places: list[str] = []
    input_arcs = []
    output_arcs = []
    transport_arcs = []
    m0: dict[str, tuple[int, ...]] = {}
    target: dict[str, int] = {}
    kinds: dict[str, str] = {}
    waits: set[str] = set()
    for u in units:
        places.extend(u.net.places)
        transitions.extend(t for t in u.net.transitions if t.id not in rename)
        input_arcs.extend(replace(a, transition=rename.get(a.transition, a.transition))
                          for a in u.net.input_arcs)
        output_arcs.extend(replace(a, transition=rename.get(a.transition, a.transition))
                           for a in u.net.output_arcs)
        transport_arcs.extend(replace(a, transition=rename.get(a.transition, a.transition))
                              for a in u.net.transport_arcs)
        m0.update(u.m0)
        target.update(u.target)
        for tid, kind in u.transition_kinds.items():
            kinds[rename.get(tid, tid)] = kind
        waits |= set(u.wait_places)

    net = Tapn(
        name="+".join(sorted(names)),
        places=tuple(sorted(places)),
        transitions=tuple(sorted(transitions, key=lambda t: t.id)),
        input_arcs=tuple(sorted(input_arcs, key=lambda a: (a.place, a.transition))),
        output_arcs=tuple(sorted(output_arcs, key=lambda a: (a.transition, a.place))),
        transport_arcs=tuple(sorted(transport_arcs,
                                    key=lambda a: (a.source, a.transition, a.target))),
    )
    net.check()
    return TranslationUnit(
        tcsd=None,
        net=net,
        m0=m0,
        target=target,
        event_map={},
        transition_kinds=kinds,
        wait_places=frozenset(waits),
    )


@dataclass
class Verdict:
    status: str  # consistent | ordering-deadlock | timing-conflict | bound-exceeded
    matching: SyncMatching
    pair_labels: tuple[str, ...]  # label per matching pair
    witness: list[TraceStep] | None
    blocking: tuple[str, ...]  # labels of transitions stuck at the dead frontier
    states_explored: int


@dataclass
class AnalysisReport:
    overall: str  # consistent | inconsistent | inconclusive
    verdicts: list[Verdict]
    policy: str
    require_all: bool
    matchings_truncated: bool
    unit_names: tuple[str, ...]

    @property
    def failure_classes(self) -> tuple[str, ...]:
        return tuple(sorted({v.status for v in self.verdicts
                             if v.status in (ORDERING_DEADLOCK, TIMING_CONFLICT)}))


def _blocking_labels(net: Tapn, frontier) -> tuple[str, ...]:
    """Labeled transitions with some marked input place in a dead marking.

    A heuristic presentation of the deadlock cause, not claimed minimal:
    every dead marking disables all transitions, so any labeled transition
    whose input side is partly supplied is a stuck synchronization point.
    """
    found: set[str] = set()
    for t in net.transitions:
        if t.label is None:
            continue
        sources = [tapn._arc_source(a) for a in tapn.incoming_arcs(net, t.id)]
        for m in frontier:
            if any(m.get(p) for p in sources):
                found.add(t.label)
                break
    return tuple(sorted(found))


def check_consistency(units: list[TranslationUnit], imap: InstanceMap,
                      policy: str = MAXIMAL, require_all: bool = False,
                      max_states: int = 1_000_000,
                      max_total_delay: int | None = None,
                      max_matchings: int = 64) -> AnalysisReport:
    """Run the full analysis: one verdict per synchronization combination.

    A matching is consistent when the merged target is reachable; an
    unreachable matching is a timing conflict if the relaxed net reaches
    the target and an ordering deadlock otherwise.  The overall verdict
    accepts the first consistent matching unless ``require_all`` is set.
    """
    names = [u.name for u in units]
    suts = [imap.sut_components[n] for n in names]
    if len(set(suts)) != len(suts):
        raise IntegrationError(
            "two diagrams test the same component: %s"
            % sorted(c for c in suts if suts.count(c) > 1))

    label_of = {}
    for u in units:
        for t in u.net.transitions:
            label_of[t.id] = t.label

    stream = enumerate_matchings(units, imap, policy)
    matchings = list(itertools.islice(stream, max_matchings))
    truncated = next(stream, None) is not None

    verdicts: list[Verdict] = []
    for matching in matchings:
        merged = merge(units, matching)
        pair_labels = tuple(label_of[a] for a, _ in matching.pairs)
        timed = tapn.reachable(merged.net, merged.m0, merged.target,
                               max_states=max_states,
                               max_total_delay=max_total_delay)
        if timed.verdict == tapn.REACHABLE:
            verdicts.append(Verdict(CONSISTENT, matching, pair_labels,
                                    timed.trace, (), timed.states_explored))
            continue
        if timed.verdict == tapn.BOUND_EXCEEDED:
            verdicts.append(Verdict(BOUND_EXCEEDED, matching, pair_labels,
                                    None, (), timed.states_explored))
            continue
        untimed = tapn.untimed_reachable(merged.net, merged.m0, merged.target,
                                         max_states=max_states,
                                         max_total_delay=max_total_delay)
        if untimed.verdict == tapn.REACHABLE:
            status = TIMING_CONFLICT
        elif untimed.verdict == tapn.UNREACHABLE:
            status = ORDERING_DEADLOCK
        else:
            status = BOUND_EXCEEDED
        blocking = ()
        if status == ORDERING_DEADLOCK:
            blocking = _blocking_labels(merged.net, timed.frontier)
        verdicts.append(Verdict(status, matching, pair_labels, None, blocking,
                                timed.states_explored))

    concluded = [v.status for v in verdicts]
    if require_all:
        if any(s in (ORDERING_DEADLOCK, TIMING_CONFLICT) for s in concluded):
            overall = "inconsistent"
        elif truncated or any(s == BOUND_EXCEEDED for s in concluded):
            overall = "inconclusive"
        else:
            overall = CONSISTENT
    else:
        if any(s == CONSISTENT for s in concluded):
            overall = CONSISTENT
        elif truncated or any(s == BOUND_EXCEEDED for s in concluded):
            overall = "inconclusive"
        else:
            overall = "inconsistent"
    return AnalysisReport(overall, verdicts, policy, require_all, truncated,
                          tuple(names))
