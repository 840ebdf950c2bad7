"""Explicit-state unwrapping of a combined graph into a serial labelled LTS."""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .composition import CombinedGraph, combine
from .expr import TRUE, EvalError, Expr, render, vars_of
from .lang import Layout, MASGraph

MODEL_FORMAT_VERSION = 1
DEFAULT_STATE_BUDGET = 50_000_000


class StateBudgetExceeded(RuntimeError):
    def __init__(self, budget: int, explored: int, frontier: int):
        super().__init__(f"state budget {budget} exceeded "
                         f"({explored} states explored, {frontier} in frontier)")
        self.budget, self.explored, self.frontier = budget, explored, frontier


@dataclass
class Model:
    """Serial LTS.  States are dense ids; payloads are (location, vector)."""
    layout: Layout
    agent_names: tuple
    locations: list  # id -> location tuple (interned)
    vectors: list  # id -> evaluation vector
    initial: list
    succ: list  # id -> sorted list of successor ids
    atoms: tuple = ()  # requested guard propositions
    atom_values: dict = field(default_factory=dict)  # atom -> np.bool_ array
    closure_loops: set = field(default_factory=set)  # ids given a serial self-loop

    @property
    def n_states(self) -> int:
        return len(self.vectors)

    @property
    def n_transitions(self) -> int:
        return sum(len(s) for s in self.succ)

    def state(self, sid: int) -> tuple:
        return self.locations[sid], self.vectors[sid]

    def env(self, sid: int) -> dict:
        return self.layout.to_env(self.vectors[sid])

    def label(self, sid: int) -> frozenset:
        """Location propositions (agent, loc) plus the atoms that hold."""
        loc = self.locations[sid]
        props = {(a, l) for a, l in zip(self.agent_names, loc)}
        props.update(a for a in self.atoms if self.atom_values[a][sid])
        return frozenset(props)

    def predecessors(self) -> list:
        pred = [[] for _ in range(self.n_states)]
        for s, ts in enumerate(self.succ):
            for t in ts:
                pred[t].append(s)
        return pred

    def add_atoms(self, atoms: Iterable[Expr]) -> None:
        """Evaluate further guard propositions on every state."""
        new = [a for a in atoms if a not in self.atom_values]
        for a in new:
            fn = self.layout.compile_guard(a, with_loc=True)
            vals = np.zeros(self.n_states, dtype=bool)
            for sid in range(self.n_states):
                try:
                    vals[sid] = fn(self.locations[sid], self.vectors[sid]) is True
                except EvalError:
                    pass  # faulting guard: not in Sat(g)
            self.atom_values[a] = vals
        self.atoms = tuple(self.atoms) + tuple(new)


def unwrap(G, requested_guards: Iterable[Expr] = (), state_budget: int = DEFAULT_STATE_BUDGET,
           reachable_only: bool = True) -> Model:
    """Reachable unwrapping of a combined graph (or of a MAS graph).

    Ids follow BFS order from the initial states; the successors of a state
    are numbered in (location tuple, evaluation vector) order.
    """
    if isinstance(G, MASGraph):
        G = combine(G, reachable_only=reachable_only)
    S = G.system
    layout = S.layout()
    by_order = sorted(G.locations, key=_loc_key(S))
    order = {l: k for k, l in enumerate(by_order)}
    compiled = {}
    for loc in G.locations:
        compiled[loc] = [(None if e.guard == TRUE else layout.compile_guard(e.guard),
                          layout.compile_update(e.update), order[e.dst])
                         for e in G.edges_from(loc)]

    init_vec = layout.to_vector(S.initial_evaluation())
    index = {(order[G.l0], init_vec): 0}
    locations, vectors, succ = [G.l0], [init_vec], []
    closure = set()
    queue = deque([0])
    while queue:
        sid = queue.popleft()
        vec = vectors[sid]
        targets = set()
        for guard, upd, od in compiled[locations[sid]]:
            try:
                if guard is None or guard(vec):
                    targets.add((od, upd(vec) if upd else vec))
            except EvalError:
                continue  # faulting edge is not enabled
        if not targets:
            succ.append([sid])
            closure.add(sid)
            continue
        ids = []
        for key in sorted(targets):
            tid = index.get(key)
            if tid is None:
                tid = len(vectors)
                if tid >= state_budget:
                    raise StateBudgetExceeded(state_budget, tid, len(queue))
                index[key] = tid
                locations.append(by_order[key[0]])
                vectors.append(key[1])
                queue.append(tid)
            ids.append(tid)
        ids.sort()
        succ.append(ids)
    del index
    M = Model(layout, G.agent_names, locations, vectors, [0], succ, closure_loops=closure)
    M.add_atoms(requested_guards)
    return M


def _loc_key(S):
    index = [{l: k for k, l in enumerate(a.locations)} for a in S.agents]
    return lambda loc: tuple(index[i][c] for i, c in enumerate(loc))


def reachable(M: Model) -> set:
    seen = set(M.initial)
    queue = deque(M.initial)
    while queue:
        s = queue.popleft()
        for t in M.succ[s]:
            if t not in seen:
                seen.add(t)
                queue.append(t)
    return seen


def project_ap(M: Model, V) -> set:
    """Propositions over ``V``: every location proposition plus the requested
    guards whose variables all lie in ``V``."""
    V = set(V)
    props = {(a, l) for sid in range(M.n_states) for a, l in zip(M.agent_names, M.locations[sid])}
    props.update(g for g in M.atoms if vars_of(g) <= V)
    return props


def reachable_projections(M: Model, names) -> dict:
    """location -> set of value vectors over ``names`` seen in reachable states."""
    slots = M.layout.slots_of_names(set(names))
    out: dict = {}
    for sid in reachable(M):
        vec = M.vectors[sid]
        out.setdefault(M.locations[sid], set()).add(tuple(vec[k] for k in slots))
    return out


def stats(M: Model) -> dict:
    return {"states": M.n_states, "transitions": M.n_transitions,
            "initial": len(M.initial), "closure_loops": len(M.closure_loops),
            "locations": len(set(M.locations))}


def model_to_json(M: Model) -> dict:
    return {
        "format": "masabs-model",
        "version": MODEL_FORMAT_VERSION,
        "agents": list(M.agent_names),
        "variables": [d.name for d in M.layout.decls],
        "slots": [M.layout.slot_name(k) for k in range(M.layout.width)],
        "initial": list(M.initial),
        "states": [{"id": sid, "location": list(M.locations[sid]), "values": list(M.vectors[sid])}
                   for sid in range(M.n_states)],
        "transitions": [[s, t] for s in range(M.n_states) for t in M.succ[s]],
        "atoms": [render(a) for a in M.atoms],
        "labelling": {render(a): np.flatnonzero(M.atom_values[a]).tolist() for a in M.atoms},
    }


def dump_model(M: Model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_json(M), fh)
