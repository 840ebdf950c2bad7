"""Approximation of the values variables can take at each location.

Upper mode over-approximates the reachable projections (every reachable
``<l, eta>`` has ``eta(V)`` in ``d(V, l)``); lower mode under-approximates them
(every value in ``d(V, l)`` is witnessed by a reachable state).
"""
from __future__ import annotations

import heapq
import itertools
import json
import logging
from dataclasses import dataclass, replace

from .composition import CombinedGraph, combine
from .expr import EvalError
from .lang import AgentGraph, Edge, MASGraph, never_faults

log = logging.getLogger(__name__)

UPPER, LOWER = "upper", "lower"
ENUMERATION_CAP = 200_000


@dataclass(frozen=True)
class LocalDomain:
    mode: str
    vars: tuple  # tracked variable names, sorted
    slots: tuple  # slot labels of the vectors, e.g. ('A.x', 'A.k[1]')
    table: dict  # location -> frozenset of value vectors

    def __getitem__(self, loc) -> frozenset:
        return self.table.get(loc, frozenset())

    def to_json(self) -> dict:
        return {"mode": self.mode, "vars": list(self.vars), "slots": list(self.slots),
                "table": {"|".join(loc) if isinstance(loc, tuple) else loc:
                          sorted(list(v) for v in vals)
                          for loc, vals in self.table.items()}}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)


@dataclass(frozen=True)
class NarrowedDomain:
    agent: int
    vars: tuple
    slots: tuple
    table: dict  # local location -> frozenset of vectors

    def __getitem__(self, loc) -> frozenset:
        return self.table.get(loc, frozenset())


# ---------------------------------------------------------------------------


def reachability_index(G: CombinedGraph) -> dict:
    """Number of other locations reachable from each location.

    Transitive closure by Warshall's algorithm on integer bitsets.
    """
    locs = list(G.locations)
    pos = {l: k for k, l in enumerate(locs)}
    rows = [0] * len(locs)
    for e in G.edges:
        if e.src in pos and e.dst in pos:
            rows[pos[e.src]] |= 1 << pos[e.dst]
    for k in range(len(locs)):
        bit = 1 << k
        rk = rows[k]
        for i in range(len(locs)):
            if rows[i] & bit:
                rows[i] |= rk
    return {l: bin(rows[i] & ~(1 << i)).count("1") for i, l in enumerate(locs)}


def _slice(update: tuple, vset: set, layout) -> tuple:
    """Atoms of ``update`` that can influence the final values of ``vset``.

    Dropping the rest ignores their faults, which only enlarges an upper
    image; lower mode admits only edges whose dropped atoms cannot fault.
    """
    need = set(vset)
    keep = []
    for a in reversed(update):
        if layout.write_slots(a) & need:
            keep.append(a)
            need |= layout.read_slots(a)
    return tuple(reversed(keep))


class _EdgeImage:
    """Image of one edge on the tracked slots (the edge-label procedure)."""

    def __init__(self, edge: Edge, layout, vslots: list, mode: str):
        self.edge = edge
        self.layout = layout
        self.vslots = vslots
        vset = set(vslots)
        self.slice = _slice(edge.update, vset, layout)
        reads = layout.read_slots(edge.guard) | layout.read_slots(self.slice)
        self.free = sorted(reads - vset)
        self.guard = layout.compile_guard(edge.guard)
        self.update = layout.compile_update(self.slice)
        self.cache = {}
        self.enabled_in_lower = mode == UPPER or self._autonomous(edge, layout, vset)
        n = 1
        for k in self.free:
            lo, hi = layout.slot_bounds[k]
            n *= hi - lo + 1
        self.n_free = n

    @staticmethod
    def _autonomous(edge, layout, vset) -> bool:
        # the edge fires whenever its guard holds on V, whatever the other
        # variables are, and its effect on V depends on V alone
        if not layout.read_slots(edge.guard) <= vset:
            return False
        decls = layout.by_name
        for a in edge.update:
            writes = layout.write_slots(a)
            if writes & vset:
                if not layout.read_slots(a) <= vset:
                    return False
            elif not never_faults(a, decls):
                return False
        return True

    def image(self, c: tuple, base: list) -> frozenset:
        hit = self.cache.get(c)
        if hit is not None:
            return hit
        vec = list(base)
        for k, v in zip(self.vslots, c):
            vec[k] = v
        out = set()
        if self.n_free > ENUMERATION_CAP:
            log.warning("edge %s: %d free evaluations, widening image", self.edge.label(), self.n_free)
            out = self._widened(c)
        else:
            ranges = [range(self.layout.slot_bounds[k][0], self.layout.slot_bounds[k][1] + 1)
                      for k in self.free]
            for combo in itertools.product(*ranges):
                for k, v in zip(self.free, combo):
                    vec[k] = v
                t = tuple(vec)
                try:
                    if not self.guard(t):
                        continue
                    r = self.update(t) if self.update else t
                except EvalError:
                    continue
                out.add(tuple(r[k] for k in self.vslots))
        res = frozenset(out)
        self.cache[c] = res
        return res

    def _widened(self, c):
        written = set()
        for a in self.edge.update:
            written |= self.layout.write_slots(a)
        ranges = []
        for k, v in zip(self.vslots, c):
            lo, hi = self.layout.slot_bounds[k]
            ranges.append(range(lo, hi + 1) if k in written else (v,))
        return set(itertools.product(*ranges))


def approx_local_domain(G, V, mode: str = UPPER, priority: bool = True) -> LocalDomain:
    """Fixpoint approximation of ``d(V, l)`` over the combined graph.

    Locations are revisited from a max-priority worklist keyed by the
    reachability index (FIFO among equal keys, or plain FIFO when
    ``priority`` is false).  Self-loops are iterated to local stability.

    Upper mode follows every edge, ranging variables outside ``V`` over their
    full domains.  Lower mode only follows edges whose guard and whose effect
    on ``V`` depend on ``V`` alone and which cannot fault, so every value it
    records is realised by some concrete run.
    """
    if isinstance(G, MASGraph):
        G = combine(G, reachable_only=True)
    if mode not in (UPPER, LOWER):
        raise ValueError(f"unknown mode {mode!r}")
    S = G.system
    layout = S.layout()
    V = tuple(sorted(set(V)))
    unknown = [v for v in V if v not in layout.by_name]
    if unknown:
        raise KeyError(f"unknown variables {unknown}")
    vslots = layout.slots_of_names(set(V))
    base = list(layout.to_vector(S.initial_evaluation()))
    init = tuple(base[k] for k in vslots)

    images = {}
    incoming = {l: {} for l in G.locations}  # dst -> src -> [image]
    loops = {l: [] for l in G.locations}
    for e in G.edges:
        img = images.setdefault(id(e), _EdgeImage(e, layout, vslots, mode))
        if not img.enabled_in_lower:
            continue
        if e.src == e.dst:
            loops[e.src].append(img)
        else:
            incoming[e.dst].setdefault(e.src, []).append(img)
    succ = {l: [] for l in G.locations}
    for dst, srcs in incoming.items():
        for src in srcs:
            succ[src].append(dst)

    r = reachability_index(G) if priority else {l: 0 for l in G.locations}
    d = {l: set() for l in G.locations}
    preds = {l: set() for l in G.locations}
    color = {l: "white" for l in G.locations}
    d[G.l0] = {init}

    heap, queued, counter = [], set(), itertools.count()

    def enqueue(l):
        if l not in queued:
            queued.add(l)
            heapq.heappush(heap, (-r[l], next(counter), l))

    enqueue(G.l0)
    visits = 0
    while heap:
        _, _, l = heapq.heappop(heap)
        queued.discard(l)
        visits += 1
        before = len(d[l])
        for src in preds[l]:
            for img in incoming[l].get(src, ()):
                for c in list(d[src]):
                    d[l] |= img.image(c, base)
        preds[l] = set()
        if len(d[l]) != before:
            color[l] = "grey"
        while True:
            size = len(d[l])
            for img in loops[l]:
                for c in list(d[l]):
                    d[l] |= img.image(c, base)
            if len(d[l]) == size:
                break
            color[l] = "grey"
        if color[l] != "black":
            for nxt in succ[l]:
                preds[nxt].add(l)
                enqueue(nxt)
            color[l] = "black"
    log.debug("approx_local_domain(%s, %s): %d visits", V, mode, visits)
    slots = tuple(layout.slot_name(k) for k in vslots)
    return LocalDomain(mode, V, slots, {l: frozenset(v) for l, v in d.items()})


def sweep(G, d: LocalDomain) -> list:
    """One more pass of every edge image over ``d``; returns the
    ``(location, vector)`` pairs it would add.  Empty at a fixpoint."""
    if isinstance(G, MASGraph):
        G = combine(G, reachable_only=True)
    S = G.system
    layout = S.layout()
    vslots = layout.slots_of_names(set(d.vars))
    base = list(layout.to_vector(S.initial_evaluation()))
    new = []
    for e in G.edges:
        img = _EdgeImage(e, layout, vslots, d.mode)
        if not img.enabled_in_lower:
            continue
        for c in d[e.src]:
            new.extend((e.dst, v) for v in img.image(c, base) - d[e.dst])
    return new


def narrow(d: LocalDomain, i: int, locations=None) -> NarrowedDomain:
    """Union of ``d`` over all product locations whose i-th component is fixed."""
    table = {}
    for loc, vals in d.table.items():
        table.setdefault(loc[i], set()).update(vals)
    if locations is not None:
        for l in locations:
            table.setdefault(l, set())
    return NarrowedDomain(i, d.vars, d.slots, {l: frozenset(v) for l, v in table.items()})


def template_domain(S: MASGraph, agent, V, mode: str = UPPER) -> NarrowedDomain:
    """Coarse domain of one agent graph treated standalone.

    Upper mode erases synchronisation labels (edges kept), lower mode deletes
    synchronising edges.  Shared variables keep their declarations; initial
    values come from ``S``.
    """
    i = agent if isinstance(agent, int) else S.agent_index(agent)
    T: AgentGraph = S.agents[i]
    if mode == UPPER:
        edges = tuple(replace(e, sync=None) for e in T.edges)
    else:
        edges = tuple(e for e in T.edges if e.sync is None)
    init = S.initial_evaluation()
    shared = tuple(replace(v, default=init[v.name]) for v in S.shared_vars)
    local = tuple(replace(v, default=init[v.name]) for v in T.vars)
    single = MASGraph(shared, (replace(T, vars=local, edges=edges),), S.channels)
    d = approx_local_domain(combine(single, reachable_only=True), V, mode)
    return narrow(d, 0, T.locations)


def verify_lower(d: LocalDomain, projections: dict) -> list:
    """Values of a lower domain not witnessed by ``projections``
    (location -> set of reachable vectors).  Empty list means sound."""
    bad = []
    for loc, vals in d.table.items():
        for c in vals - projections.get(loc, set()):
            bad.append((loc, c))
    return bad
