"""Product construction: interleaving plus 1-to-1 channel handshakes."""
from __future__ import annotations

import itertools
import warnings
from collections import deque
from dataclasses import dataclass, field

from .expr import FALSE, conj
from .lang import Edge, MASGraph


@dataclass(frozen=True)
class CombinedGraph:
    """The single agent graph of a MAS graph.

    Locations are tuples with one component per agent (declaration order).
    Each edge records its provenance: ``((agent, edge_index), ...)`` with the
    sender first for handshakes.
    """
    system: MASGraph
    locations: tuple
    l0: tuple
    edges: tuple
    _out: dict = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        out = {l: [] for l in self.locations}
        for e in self.edges:
            out[e.src].append(e)
        object.__setattr__(self, "_out", out)

    @property
    def agent_names(self) -> tuple:
        return tuple(a.name for a in self.system.agents)

    def edges_from(self, loc) -> list:
        return self._out.get(loc, [])

    def successors(self, loc) -> list:
        seen = {}
        for e in self._out.get(loc, []):
            seen.setdefault(e.dst, None)
        return list(seen)

    def vars(self) -> list:
        return self.system.all_vars()


def _local_moves(S: MASGraph, loc: tuple):
    """Yield (dst, guard, update, provenance) for every rule instance at ``loc``."""
    agents = S.agents
    for i, a in enumerate(agents):
        for ei, e in enumerate(a.edges):
            if e.src != loc[i]:
                continue
            if e.sync is None:
                dst = loc[:i] + (e.dst,) + loc[i + 1:]
                yield dst, e.guard, e.update, ((i, ei),)
            elif e.sync[0] == "!":
                for j, b in enumerate(agents):
                    if j == i:
                        continue
                    for fj, f in enumerate(b.edges):
                        if f.src != loc[j] or f.sync != ("?", e.sync[1]):
                            continue
                        dst = list(loc)
                        dst[i], dst[j] = e.dst, f.dst
                        guard = conj(e.guard, f.guard)
                        if guard == FALSE:
                            continue
                        # sender's update runs first, then the receiver's
                        yield tuple(dst), guard, e.update + f.update, ((i, ei), (j, fj))


def _check_channels(S: MASGraph):
    senders = {e.sync[1] for a in S.agents for e in a.edges if e.sync and e.sync[0] == "!"}
    receivers = {e.sync[1] for a in S.agents for e in a.edges if e.sync and e.sync[0] == "?"}
    for c in sorted(senders - receivers):
        warnings.warn(f"channel {c!r} has senders but no receiver", stacklevel=3)


def combine(S: MASGraph, reachable_only: bool = False) -> CombinedGraph:
    """Combined MAS graph over the full location product.

    With ``reachable_only`` the product is explored from the initial location
    tuple instead, which equals ``restrict_to_reachable_locations(combine(S))``
    without materialising unreachable tuples.
    """
    _check_channels(S)
    l0 = tuple(a.l0 for a in S.agents)
    if reachable_only:
        seen = {l0: None}
        queue = deque([l0])
        edges = []
        while queue:
            loc = queue.popleft()
            for dst, g, u, prov in _local_moves(S, loc):
                edges.append(Edge(loc, dst, g, None, u, prov))
                if dst not in seen:
                    seen[dst] = None
                    queue.append(dst)
        locs = sorted(seen, key=_loc_order(S))
        return CombinedGraph(S, tuple(locs), l0, tuple(sorted(edges, key=_edge_order(S))))
    locs = tuple(itertools.product(*(a.locations for a in S.agents)))
    edges = [Edge(loc, dst, g, None, u, prov)
             for loc in locs for dst, g, u, prov in _local_moves(S, loc)]
    return CombinedGraph(S, locs, l0, tuple(edges))


def _loc_order(S):
    index = [{l: k for k, l in enumerate(a.locations)} for a in S.agents]
    return lambda loc: tuple(index[i][c] for i, c in enumerate(loc))


def _edge_order(S):
    lo = _loc_order(S)
    return lambda e: (lo(e.src), e.provenance)


def location_reachable(G: CombinedGraph) -> set:
    """Locations reachable from l0 in the location digraph (guards ignored)."""
    seen = {G.l0}
    queue = deque([G.l0])
    while queue:
        loc = queue.popleft()
        for dst in G.successors(loc):
            if dst not in seen:
                seen.add(dst)
                queue.append(dst)
    return seen


def restrict_to_reachable_locations(G: CombinedGraph) -> CombinedGraph:
    keep = location_reachable(G)
    locs = tuple(l for l in G.locations if l in keep)
    edges = tuple(e for e in G.edges if e.src in keep)
    return CombinedGraph(G.system, locs, G.l0, edges)


def single_agent_view(G: CombinedGraph):
    """The combined graph as a plain AgentGraph (location tuples as names)."""
    from .lang import AgentGraph

    names = {l: "_".join(l) for l in G.locations}
    edges = tuple(Edge(names[e.src], names[e.dst], e.guard, None, e.update, e.provenance)
                  for e in G.edges)
    return AgentGraph("combined", tuple(G.system.all_vars()), tuple(names[l] for l in G.locations),
                      names[G.l0], edges)
