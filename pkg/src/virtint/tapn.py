"""Timed-arc Petri nets with transport arcs and a reachability engine.

Tokens carry integer ages.  Input arcs (normal and transport) are guarded
by intervals; firing consumes one token of matching age per incoming arc
and produces age-0 tokens on normal output arcs and age-preserving tokens
on transport arcs.  A delay increases every age uniformly.

The engine works in discrete time.  Token ages above the largest finite
guard constant C are indistinguishable to every ``[a,b]``/``[a,oo)`` guard,
so states store ages capped at C+1 and single-step delays range over
0..C+1; this keeps the state space finite without losing reachability.
Finite right-open guards ``[a,b)`` are representable but rejected at
analysis time.
"""

from __future__ import annotations

import itertools
from collections import Counter, deque
from dataclasses import dataclass, replace


class UnsupportedGuardError(Exception):
    """The engine cannot analyse nets with finite right-open guards."""


@dataclass(frozen=True)
class Guard:
    lower: int
    upper: int | None = None  # None means unbounded
    upper_closed: bool = True

    def __post_init__(self):
        if self.lower < 0:
            raise ValueError("guard lower bound must be >= 0")
        if self.upper is None:
            # An unbounded interval is always right-open.
            object.__setattr__(self, "upper_closed", False)
        elif self.upper < self.lower:
            raise ValueError("guard upper bound below lower bound")

    def contains(self, age: int) -> bool:
        if age < self.lower:
            return False
        if self.upper is None:
            return True
        return age <= self.upper if self.upper_closed else age < self.upper

    def __str__(self):
        if self.upper is None:
            return "[%d,∞)" % self.lower
        close = "]" if self.upper_closed else ")"
        return "[%d,%d%s" % (self.lower, self.upper, close)


ANY_AGE = Guard(0)


def exact(delta: int) -> Guard:
    return Guard(delta, delta)


def at_most(delta: int) -> Guard:
    return Guard(0, delta)


@dataclass(frozen=True)
class Transition:
    id: str
    label: str | None = None  # None renders as the silent label


@dataclass(frozen=True)
class InputArc:
    place: str
    transition: str
    guard: Guard = ANY_AGE


@dataclass(frozen=True)
class OutputArc:
    transition: str
    place: str


@dataclass(frozen=True)
class TransportArc:
    source: str
    transition: str
    target: str
    guard: Guard = ANY_AGE


@dataclass(frozen=True)
class Tapn:
    name: str
    places: tuple[str, ...]
    transitions: tuple[Transition, ...]
    input_arcs: tuple[InputArc, ...]
    output_arcs: tuple[OutputArc, ...]
    transport_arcs: tuple[TransportArc, ...]

    def check(self):
        """Raise ValueError when the structural side conditions fail."""
        pset = set(self.places)
        tset = {t.id for t in self.transitions}
        if len(pset) != len(self.places):
            raise ValueError("duplicate place ids")
        if len(tset) != len(self.transitions):
            raise ValueError("duplicate transition ids")
        if pset & tset:
            raise ValueError("place and transition ids overlap: %s" % (pset & tset))
        for arc in self.input_arcs:
            if arc.place not in pset or arc.transition not in tset:
                raise ValueError("dangling input arc %s" % (arc,))
        for arc in self.output_arcs:
            if arc.place not in pset or arc.transition not in tset:
                raise ValueError("dangling output arc %s" % (arc,))
        normal_in = {(a.place, a.transition) for a in self.input_arcs}
        normal_out = {(a.transition, a.place) for a in self.output_arcs}
        seen_in: set[tuple[str, str]] = set()
        seen_out: set[tuple[str, str]] = set()
        for arc in self.transport_arcs:
            if (arc.source not in pset or arc.target not in pset
                    or arc.transition not in tset):
                raise ValueError("dangling transport arc %s" % (arc,))
            if (arc.source, arc.transition) in seen_in:
                raise ValueError("two transport arcs leave %s via %s"
                                 % (arc.source, arc.transition))
            if (arc.transition, arc.target) in seen_out:
                raise ValueError("two transport arcs reach %s via %s"
                                 % (arc.target, arc.transition))
            seen_in.add((arc.source, arc.transition))
            seen_out.add((arc.transition, arc.target))
            if (arc.source, arc.transition) in normal_in:
                raise ValueError("%s->%s is both a normal and a transport arc"
                                 % (arc.source, arc.transition))
            if (arc.transition, arc.target) in normal_out:
                raise ValueError("%s->%s is both a normal and a transport arc"
                                 % (arc.transition, arc.target))

    def label_of(self, tid: str) -> str | None:
        for t in self.transitions:
            if t.id == tid:
                return t.label
        raise KeyError(tid)


Marking = dict[str, tuple[int, ...]]
TargetSpec = dict[str, int]


def normalize_marking(m: Marking) -> Marking:
    return {p: tuple(sorted(ages)) for p, ages in m.items() if ages}


def delay(m: Marking, d: int) -> Marking:
    """Age every token by exactly d ticks."""
    if d < 0:
        raise ValueError("delay must be >= 0")
    return {p: tuple(a + d for a in ages) for p, ages in m.items()}


def incoming_arcs(net: Tapn, tid: str):
    """Incoming arcs of a transition, normal arcs first, in net order."""
    arcs: list[InputArc | TransportArc] = [
        a for a in net.input_arcs if a.transition == tid
    ]
    arcs.extend(a for a in net.transport_arcs if a.transition == tid)
    return arcs


def _arc_source(arc) -> str:
    return arc.place if isinstance(arc, InputArc) else arc.source


def _bindings(arcs, m: Marking):
    """All age choices satisfying the guards, up to multiset symmetry."""
    pools = {p: Counter(m.get(p, ())) for p in {_arc_source(a) for a in arcs}}
    chosen: list[int] = []
    out: list[tuple[int, ...]] = []

    def rec(k):
        if k == len(arcs):
            out.append(tuple(chosen))
            return
        arc = arcs[k]
        pool = pools[_arc_source(arc)]
        for age in sorted(a for a, n in pool.items() if n > 0 and arc.guard.contains(a)):
            pool[age] -= 1
            chosen.append(age)
            rec(k + 1)
            chosen.pop()
            pool[age] += 1

    rec(0)
    return out


def enabled(net: Tapn, m: Marking):
    """All (transition id, binding) pairs fireable in marking m.

    A binding lists one consumed token age per incoming arc, aligned with
    ``incoming_arcs``.
    """
    m = normalize_marking(m)
    result = []
    for t in net.transitions:
        arcs = incoming_arcs(net, t.id)
        for binding in _bindings(arcs, m):
            result.append((t.id, binding))
    return result


def fire(net: Tapn, m: Marking, tid: str, binding) -> Marking:
    """Fire a transition, consuming the bound token ages.

    Raises ValueError when the binding is not enabled in m.
    """
    m = normalize_marking(m)
    arcs = incoming_arcs(net, tid)
    if len(binding) != len(arcs):
        raise ValueError("binding arity %d does not match %d incoming arcs"
                         % (len(binding), len(arcs)))
    pools = {p: Counter(m.get(p, ())) for p in {_arc_source(a) for a in arcs}}
    produced: list[tuple[str, int]] = []
    for arc, age in zip(arcs, binding):
        if not arc.guard.contains(age):
            raise ValueError("age %d violates guard %s on %s" % (age, arc.guard, tid))
        pool = pools[_arc_source(arc)]
        if pool[age] <= 0:
            raise ValueError("no token of age %d in %s" % (age, _arc_source(arc)))
        pool[age] -= 1
        if isinstance(arc, TransportArc):
            produced.append((arc.target, age))
    for arc in net.output_arcs:
        if arc.transition == tid:
            produced.append((arc.place, 0))
    new = {p: list(ages) for p, ages in m.items()}
    for arc, age in zip(arcs, binding):
        new[_arc_source(arc)].remove(age)
    for place, age in produced:
        new.setdefault(place, []).append(age)
    return normalize_marking({p: tuple(v) for p, v in new.items()})


def max_guard_constant(net: Tapn) -> int:
    """Largest finite constant appearing in any guard (0 when none)."""
    c = 0
    for arc in list(net.input_arcs) + list(net.transport_arcs):
        c = max(c, arc.guard.lower)
        if arc.guard.upper is not None:
            c = max(c, arc.guard.upper)
    return c


def widen_guards(net: Tapn) -> Tapn:
    """Copy of the net with every guard relaxed to allow any age."""
    return replace(
        net,
        input_arcs=tuple(replace(a, guard=ANY_AGE) for a in net.input_arcs),
        transport_arcs=tuple(replace(a, guard=ANY_AGE) for a in net.transport_arcs),
    )


@dataclass(frozen=True)
class TraceStep:
    delay: int
    transition: str
    label: str | None
    # One (place, age) per incoming arc; age None means the engine proved
    # the age irrelevant (any token of that place works).
    consumed: tuple[tuple[str, int | None], ...]


@dataclass
class ReachResult:
    verdict: str  # reachable | unreachable | bound-exceeded
    trace: list[TraceStep] | None
    frontier: list[Marking]
    states_explored: int
    peak_frontier: int


REACHABLE = "reachable"
UNREACHABLE = "unreachable"
BOUND_EXCEEDED = "bound-exceeded"


class _SearchNet:
    def __init__(self, net: Tapn):
        self.net = net
        self.places = list(net.places)
        self.pidx = {p: i for i, p in enumerate(self.places)}
        self.cmax = max_guard_constant(net)
        self.cap = self.cmax + 1
        self.trans = [(t.id, t.label) for t in net.transitions]
        # Per transition: incoming (source idx, lower, upper or None,
        # transport target idx or -1) in incoming_arcs order, plus normal
        # output place idxs.  Finite bounds are closed here; open finite
        # guards are rejected before any search starts.
        self.inc: list[list[tuple[int, int, int | None, int]]] = []
        self.out: list[list[int]] = []
        self.distinct_sources: list[bool] = []
        for t in net.transitions:
            arcs = incoming_arcs(net, t.id)
            row = []
            for arc in arcs:
                g = arc.guard
                if isinstance(arc, InputArc):
                    row.append((self.pidx[arc.place], g.lower, g.upper, -1))
                else:
                    row.append((self.pidx[arc.source], g.lower, g.upper,
                                self.pidx[arc.target]))
            self.inc.append(row)
            sources = [pi for pi, _, _, _ in row]
            self.distinct_sources.append(len(set(sources)) == len(sources))
            self.out.append([self.pidx[a.place] for a in net.output_arcs
                             if a.transition == t.id])
        # Token ages only matter in places read through a non-trivial guard,
        # directly or further down a transport-arc chain.  Everywhere else
        # the canonical state stores age 0: an exact quotient, since every
        # guard touching those tokens accepts any age.
        relevant = [False] * len(self.places)
        for arc in list(net.input_arcs) + list(net.transport_arcs):
            if arc.guard.lower > 0 or arc.guard.upper is not None:
                relevant[self.pidx[_arc_source(arc)]] = True
        changed = True
        while changed:
            changed = False
            for arc in net.transport_arcs:
                src, tgt = self.pidx[arc.source], self.pidx[arc.target]
                if relevant[tgt] and not relevant[src]:
                    relevant[src] = True
                    changed = True
        self.age_relevant = relevant

    def encode(self, m: Marking):
        vec = [()] * len(self.places)
        for p, ages in normalize_marking(m).items():
            i = self.pidx[p]
            if self.age_relevant[i]:
                vec[i] = tuple(min(a, self.cap) for a in ages)
            else:
                vec[i] = (0,) * len(ages)
        return tuple(vec)

    def decode(self, state) -> Marking:
        return {self.places[i]: ages for i, ages in enumerate(state) if ages}

    def delayed(self, state, d):
        cap = self.cap
        rel = self.age_relevant
        return tuple(
            tuple(min(a + d, cap) for a in ages) if rel[i] else ages
            for i, ages in enumerate(state)
        )

    def fire_bindings(self, state, ti):
        row = self.inc[ti]
        candidates = []
        for pi, lo, hi, _ in row:
            ages = state[pi]
            if not ages:
                return ()
            if hi is None:
                cands = [a for a in dict.fromkeys(ages) if a >= lo]
            else:
                cands = [a for a in dict.fromkeys(ages) if lo <= a <= hi]
            if not cands:
                return ()
            candidates.append(cands)
        if len(row) == 1:
            return [(a,) for a in candidates[0]]
        if self.distinct_sources[ti]:
            return list(itertools.product(*candidates))
        # Shared source places: enforce multiset availability.
        pools = {}
        for pi, _, _, _ in row:
            if pi not in pools:
                counts: dict[int, int] = {}
                for a in state[pi]:
                    counts[a] = counts.get(a, 0) + 1
                pools[pi] = counts
        out = []
        chosen: list[int] = []

        def rec(k):
            if k == len(row):
                out.append(tuple(chosen))
                return
            pi = row[k][0]
            pool = pools[pi]
            for age in candidates[k]:
                if pool[age] <= 0:
                    continue
                pool[age] -= 1
                chosen.append(age)
                rec(k + 1)
                chosen.pop()
                pool[age] += 1

        rec(0)
        return out

    def fire(self, state, ti, binding):
        vec = list(state)
        touched: dict[int, list[int]] = {}

        def pool(pi):
            if pi not in touched:
                touched[pi] = list(vec[pi])
            return touched[pi]

        for (pi, _, _, tgt), age in zip(self.inc[ti], binding):
            pool(pi).remove(age)
            if tgt >= 0:
                pool(tgt).append(age if self.age_relevant[tgt] else 0)
        for pi in self.out[ti]:
            pool(pi).append(0)
        for pi, ages in touched.items():
            ages.sort()
            vec[pi] = tuple(ages)
        return tuple(vec)


def _reject_open_guards(net: Tapn):
    for arc in list(net.input_arcs) + list(net.transport_arcs):
        g = arc.guard
        if g.upper is not None and not g.upper_closed:
            raise UnsupportedGuardError(
                "finite right-open guard %s on %s is not supported by the engine"
                % (g, arc.transition))


def reachable(net: Tapn, m0: Marking, target: TargetSpec,
              max_states: int = 1_000_000,
              max_total_delay: int | None = None) -> ReachResult:
    """Decide whether some delay/fire sequence reaches the target counts.

    The target names the exact token count per place (token ages do not
    matter); every unlisted place must be empty.  Search is breadth-first
    over (delay, fire) successors, so a returned witness has a minimal
    number of steps.  Unreachable results carry the dead markings found,
    which feed the deadlock diagnostics.
    """
    _reject_open_guards(net)
    for p in target:
        if p not in net.places:
            raise ValueError("target names unknown place %r" % p)
    sn = _SearchNet(net)
    tvec = [0] * len(sn.places)
    for p, n in target.items():
        tvec[sn.pidx[p]] = n
    tvec = tuple(tvec)

    def matches(state):
        return all(len(ages) == n for ages, n in zip(state, tvec))

    start = sn.encode(m0)
    if matches(start):
        return ReachResult(REACHABLE, [], [], 1, 1)

    parents: dict = {start: None}
    queue = deque([(start, 0)])
    dead: list = []
    peak = 1
    truncated = False

    def build_trace(state):
        steps = []
        while parents[state] is not None:
            prev, step = parents[state]
            steps.append(step)
            state = prev
        steps.reverse()
        return steps

    while queue:
        peak = max(peak, len(queue))
        state, total_delay = queue.popleft()
        expanded = False
        images = set()
        for d in range(sn.cap + 1):
            img = sn.delayed(state, d)
            if img in images:
                continue
            images.add(img)
            if max_total_delay is not None and total_delay + d > max_total_delay:
                truncated = True
                continue
            for ti, (tid, label) in enumerate(sn.trans):
                for binding in sn.fire_bindings(img, ti):
                    expanded = True
                    succ = sn.fire(img, ti, binding)
                    if succ in parents:
                        continue
                    if len(parents) >= max_states:
                        truncated = True
                        continue
                    consumed = tuple(
                        (sn.places[pi], age if sn.age_relevant[pi] else None)
                        for (pi, _, _, _), age in zip(sn.inc[ti], binding)
                    )
                    step = TraceStep(d, tid, label, consumed)
                    parents[succ] = (state, step)
                    if matches(succ):
                        return ReachResult(REACHABLE, build_trace(succ), [],
                                           len(parents), peak)
                    queue.append((succ, total_delay + d))
        if not expanded:
            dead.append(state)

    verdict = BOUND_EXCEEDED if truncated else UNREACHABLE
    frontier = [sn.decode(s) for s in dead]
    return ReachResult(verdict, None, frontier, len(parents), peak)


def untimed_reachable(net: Tapn, m0: Marking, target: TargetSpec,
                      max_states: int = 1_000_000,
                      max_total_delay: int | None = None) -> ReachResult:
    """Reachability with every guard widened to allow any age."""
    return reachable(widen_guards(net), m0, target, max_states, max_total_delay)


class ReplayError(Exception):
    pass


def replay(net: Tapn, m0: Marking, trace) -> Marking:
    """Re-execute a witness trace through delay/fire with exact ages.

    Recorded consumed ages come from the capped search: an age below the
    cap must match exactly, the cap stands for any age at or above it, and
    None-aged entries accept any token of the place.  Raises ReplayError
    when a step cannot fire.
    """
    cap = max_guard_constant(net) + 1
    m = normalize_marking(m0)
    for step in trace:
        m = delay(m, step.delay)
        arcs = incoming_arcs(net, step.transition)
        if len(arcs) != len(step.consumed):
            raise ReplayError("step arity mismatch on %s" % step.transition)
        pools = {p: Counter(m.get(p, ())) for p in {_arc_source(a) for a in arcs}}
        binding = []
        for arc, (place, age) in zip(arcs, step.consumed):
            if _arc_source(arc) != place:
                raise ReplayError("step consumes from %s, arc reads %s"
                                  % (place, _arc_source(arc)))
            pool = pools[place]
            if age is None:
                candidates = sorted(a for a, n in pool.items()
                                    if n > 0 and arc.guard.contains(a))
                pick = candidates[0] if candidates else None
            elif age < cap:
                pick = age if pool[age] > 0 else None
            else:
                candidates = sorted(a for a, n in pool.items() if n > 0 and a >= cap)
                pick = candidates[0] if candidates else None
            if pick is None:
                raise ReplayError("no token of age %s in %s" % (age, place))
            pool[pick] -= 1
            binding.append(pick)
        try:
            m = fire(net, m, step.transition, tuple(binding))
        except ValueError as exc:
            raise ReplayError(str(exc)) from exc
    return m


def marking_counts(m: Marking) -> dict[str, int]:
    return {p: len(ages) for p, ages in normalize_marking(m).items()}
