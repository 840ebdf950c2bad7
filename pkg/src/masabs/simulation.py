"""Simulation preorder between unwrapped models over a set of propositions."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .unwrapping import Model


@dataclass
class SimulationResult:
    found: bool
    relation: dict = field(default_factory=dict)  # s1 -> set of s2
    blocking: Optional[tuple] = None  # (s1, s2) initial pair that could not be kept
    unmatched: Optional[tuple] = None  # (s1, s1') move of M1 that s2 cannot follow
    reason: str = ""

    def pairs(self) -> set:
        return {(s, t) for s, ts in self.relation.items() for t in ts}


def ap_label(M: Model, sid: int, AP) -> frozenset:
    """Propositions of ``AP`` holding at ``sid``.

    Location propositions are ``(agent, location)`` pairs; every other member
    of ``AP`` is an atom expression evaluated when ``M`` was built.
    """
    loc = M.locations[sid]
    out = {p for p in zip(M.agent_names, loc) if p in AP}
    for a in AP:
        if not isinstance(a, tuple):
            vals = M.atom_values.get(a)
            if vals is None:
                raise KeyError(f"proposition {a} missing from model labelling")
            if vals[sid]:
                out.add(a)
    return frozenset(out)


def check_simulation(M1: Model, M2: Model, AP) -> SimulationResult:
    """Greatest simulation of ``M1`` by ``M2`` over ``AP``.

    Starts from all label-compatible pairs and removes pairs ``(s, t)`` where
    some move ``s -> s'`` cannot be answered by a move ``t -> t'`` with
    ``(s', t')`` still related.  ``found`` holds when every initial state of
    ``M1`` is related to some initial state of ``M2``.
    """
    AP = set(AP)
    lab2: dict = {}
    for t in range(M2.n_states):
        lab2.setdefault(ap_label(M2, t, AP), set()).add(t)
    lab1 = [ap_label(M1, s, AP) for s in range(M1.n_states)]
    R = {s: set(lab2.get(lab1[s], ())) for s in range(M1.n_states)}
    why: dict = {}
    pred1 = M1.predecessors()
    queue = deque(range(M1.n_states))
    queued = set(queue)
    while queue:
        s = queue.popleft()
        queued.discard(s)
        drop = []
        for t in R[s]:
            succ_t = M2.succ[t]
            for s1 in M1.succ[s]:
                Rs1 = R[s1]
                if not any(t1 in Rs1 for t1 in succ_t):
                    drop.append(t)
                    why[(s, t)] = s1
                    break
        if drop:
            R[s].difference_update(drop)
            for p in pred1[s]:
                if p not in queued:
                    queued.add(p)
                    queue.append(p)
    for s0 in M1.initial:
        if not any(t0 in R[s0] for t0 in M2.initial):
            return _blocked(M1, M2, AP, s0, lab1, why, R)
    return SimulationResult(True, R)


def _blocked(M1, M2, AP, s0, lab1, why, R):
    same = [t0 for t0 in M2.initial if ap_label(M2, t0, AP) == lab1[s0]]
    if not same:
        t0 = M2.initial[0]
        return SimulationResult(False, R, (s0, t0), None,
                                f"initial labels differ: {sorted(map(str, lab1[s0]))} vs "
                                f"{sorted(map(str, ap_label(M2, t0, AP)))}")
    t0 = same[0]
    s1 = why.get((s0, t0))
    return SimulationResult(False, R, (s0, t0), (s0, s1),
                            f"move {s0}->{s1} of the first model has no related answer from {t0}")


def verify_simulation(M1: Model, M2: Model, AP, pairs) -> list:
    """Independent check of the simulation clauses for an explicit relation.

    Returns a list of violations (empty when ``pairs`` is a simulation that
    relates every initial state of ``M1`` to an initial state of ``M2``).
    """
    AP = set(AP)
    rel = set(pairs)
    bad = []
    for s0 in M1.initial:
        if not any((s0, t0) in rel for t0 in M2.initial):
            bad.append(("initial", s0))
    for s, t in rel:
        if ap_label(M1, s, AP) != ap_label(M2, t, AP):
            bad.append(("label", s, t))
            continue
        for s1 in M1.succ[s]:
            if not any((s1, t1) in rel for t1 in M2.succ[t]):
                bad.append(("move", s, t, s1))
    return bad


def check_state_match(s1, s2, V) -> bool:
    """Same location tuple and equal values on ``V``.

    States are ``(location, env)`` payloads, env mapping names to values.
    """
    (l1, e1), (l2, e2) = s1, s2
    if tuple(l1) != tuple(l2):
        return False
    return all(e1.get(v) == e2.get(v) for v in V)


def payload(M: Model, sid: int) -> tuple:
    return M.locations[sid], M.env(sid)


def common_ap(M1: Model, M2: Model, V) -> set:
    """Location propositions of either model plus the atoms both models
    evaluate whose variables all lie in ``V``."""
    from .unwrapping import project_ap

    a1, a2 = project_ap(M1, V), project_ap(M2, V)
    locs = {p for p in a1 | a2 if isinstance(p, tuple)}
    return locs | {a for a in a1 & a2 if not isinstance(a, tuple)}
