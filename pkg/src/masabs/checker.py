"""Fixpoint model checking of ACTL formulas on serial LTSs."""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .expr import TRUE, locrefs_of, render, vars_of
from .formula import AG, AU, AX, And, Atom, Formula, Or, TOP, show
from .unwrapping import Model


class MissingAtomError(KeyError):
    pass


@dataclass
class Verdict:
    holds: bool
    formula: str = ""
    failing_state: Optional[int] = None
    witness: Optional[tuple] = None  # (prefix ids, cycle ids)

    def to_json(self) -> dict:
        w = None if self.witness is None else {"prefix": list(self.witness[0]), "cycle": list(self.witness[1])}
        return {"holds": self.holds, "formula": self.formula, "failing_state": self.failing_state,
                "witness": w}

    def dumps(self) -> str:
        return json.dumps(self.to_json())


@dataclass
class _Graph:
    n: int
    succ: list
    pred: list = field(default_factory=list)


class Checker:
    """Evaluates formulas on one model, caching subformula results."""

    def __init__(self, M: Model, strict_until: bool = False):
        self.M = M
        self.strict_until = strict_until
        self.n = M.n_states
        self.succ = M.succ
        self.pred = M.predecessors()
        self.outdeg = np.fromiter((len(s) for s in M.succ), dtype=np.int64, count=self.n)
        self.cache: dict = {}

    # -- atoms ---------------------------------------------------------------
    def atom(self, e) -> np.ndarray:
        if e == TRUE:
            return np.ones(self.n, dtype=bool)
        if e in self.M.atom_values:
            return self.M.atom_values[e]
        if not vars_of(e) and locrefs_of(e):
            self.M.add_atoms([e])  # location-only atoms follow from the labels
            return self.M.atom_values[e]
        raise MissingAtomError(f"atom {render(e)} was not requested when the model was built")

    # -- operators -------------------------------------------------------------
    def sat(self, f: Formula) -> np.ndarray:
        hit = self.cache.get(f)
        if hit is not None:
            return hit
        if isinstance(f, Atom):
            r = self.atom(f.expr)
        elif isinstance(f, And):
            r = self.sat(f.left) & self.sat(f.right)
        elif isinstance(f, Or):
            r = self.sat(f.left) | self.sat(f.right)
        elif isinstance(f, AX):
            r = self.ax(self.sat(f.arg))
        elif isinstance(f, AG):
            r = self.ag(self.sat(f.arg))
        elif isinstance(f, AU):
            r = self.au(self.sat(f.left), self.sat(f.right))
            if self.strict_until:
                r = self.sat(f.right) | self.ax(r)
        else:
            raise TypeError(f"not a formula: {f!r}")
        self.cache[f] = r
        return r

    def ax(self, phi: np.ndarray) -> np.ndarray:
        out = np.empty(self.n, dtype=bool)
        for s, ts in enumerate(self.succ):
            out[s] = all(phi[t] for t in ts)
        return out

    def au(self, phi1: np.ndarray, phi2: np.ndarray) -> np.ndarray:
        """Least Z with Z = phi2 | (phi1 & AX Z)."""
        Z = phi2.copy()
        left = self.outdeg.copy()
        queue = deque(np.flatnonzero(Z).tolist())
        while queue:
            t = queue.popleft()
            for s in self.pred[t]:
                left[s] -= 1
                if left[s] == 0 and not Z[s] and phi1[s]:
                    Z[s] = True
                    queue.append(s)
        return Z

    def ag(self, phi: np.ndarray) -> np.ndarray:
        """Greatest Z with Z = phi & AX Z."""
        Z = phi.copy()
        queue = deque(np.flatnonzero(~Z).tolist())
        while queue:
            t = queue.popleft()
            for s in self.pred[t]:
                if Z[s]:
                    Z[s] = False
                    queue.append(s)
        return Z

    # -- counterexamples -------------------------------------------------------
    def witness(self, f: Formula, s: int) -> Optional[tuple]:
        """Lasso from ``s`` violating ``f`` (top-level AG / AU / AX), or None."""
        if isinstance(f, And):
            for g in (f.left, f.right):
                if not self.sat(g)[s]:
                    return self.witness(g, s)
            return None
        if isinstance(f, AG):
            phi = self.sat(f.arg)
            path = self._bfs(s, lambda t: not phi[t])
            return self._close(path)
        if isinstance(f, AU):
            Z = self.sat(f)
            phi1, phi2 = self.sat(f.left), self.sat(f.right)
            if self.strict_until:
                Z = self.au(phi1, phi2)
                if phi2[s]:
                    return None
                bad = [t for t in self.succ[s] if not Z[t]]
                return self._close([s] + self._au_path(bad[0], Z, phi1)) if bad else None
            return self._close(self._au_path(s, Z, phi1))
        if isinstance(f, AX):
            phi = self.sat(f.arg)
            bad = [t for t in self.succ[s] if not phi[t]]
            return self._close([s, bad[0]]) if bad else None
        return None

    def _au_path(self, s, Z, phi1):
        path, seen = [s], {s}
        cur = s
        while phi1[cur]:
            nxt = next(t for t in self.succ[cur] if not Z[t])
            if nxt in seen:
                path.append(nxt)
                return path
            path.append(nxt)
            seen.add(nxt)
            cur = nxt
        return path

    def _bfs(self, s, goal):
        parent = {s: None}
        queue = deque([s])
        while queue:
            t = queue.popleft()
            if goal(t):
                path = []
                while t is not None:
                    path.append(t)
                    t = parent[t]
                return path[::-1]
            for u in self.succ[t]:
                if u not in parent:
                    parent[u] = t
                    queue.append(u)
        return None

    def _close(self, path):
        """Extend a finite path to a lasso (prefix, cycle)."""
        if path is None:
            return None
        path = list(path)
        pos = {}
        for k, t in enumerate(path[:-1]):
            pos.setdefault(t, k)
        last = path[-1]
        if last in pos:
            k = pos[last]
            return tuple(path[:k]), tuple(path[k:-1])
        pos[last] = len(path) - 1
        while True:
            nxt = self.succ[path[-1]][0]
            if nxt in pos:
                k = pos[nxt]
                return tuple(path[:k]), tuple(path[k:])
            pos[nxt] = len(path)
            path.append(nxt)


def check(M: Model, f: Formula, strict_until: bool = False, states=None) -> Verdict:
    """Does ``f`` hold in every initial state (or every state in ``states``)?"""
    C = Checker(M, strict_until)
    Z = C.sat(f)
    for s in (M.initial if states is None else states):
        if not Z[s]:
            return Verdict(False, show(f), s, C.witness(f, s))
    return Verdict(True, show(f))


def sat_set(M: Model, f: Formula, strict_until: bool = False) -> np.ndarray:
    return Checker(M, strict_until).sat(f)


def replay_violates(M: Model, f: Formula, witness: tuple) -> bool:
    """Check that a lasso is a path of ``M`` on which the top-level path
    property of ``f`` fails (AG: some state violates the operand; AU: no
    position satisfies the right operand with the left holding before)."""
    prefix, cycle = witness
    path = list(prefix) + list(cycle)
    if not cycle:
        return False
    for a, b in zip(path, path[1:] + [cycle[0]]):
        if b not in M.succ[a]:
            return False
    C = Checker(M)
    if isinstance(f, And):
        return replay_violates(M, f.left, witness) or replay_violates(M, f.right, witness)
    if isinstance(f, AG):
        phi = C.sat(f.arg)
        return any(not phi[t] for t in path)
    if isinstance(f, AU):
        phi1, phi2 = C.sat(f.left), C.sat(f.right)
        for t in path:
            if phi2[t]:
                return False
            if not phi1[t]:
                return True
        return True  # the cycle repeats without phi2
    if isinstance(f, AX):
        second = path[1] if len(path) > 1 else cycle[0]
        return not C.sat(f.arg)[second]
    return False


__all__ = ["Checker", "Verdict", "check", "sat_set", "replay_violates", "MissingAtomError", "TOP"]
