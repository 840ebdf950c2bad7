"""Brute-force reference evaluators used as test oracles.

The ACTL evaluator works on explicit paths: a universal path formula fails at
``s`` iff some lasso (simple path closed by a back edge) from ``s`` violates
it.  Every infinite path violating an until or a globally has a violating
prefix that is a simple path, and every simple path in a serial graph extends
to a lasso, so enumerating simple paths is enough.
"""
from __future__ import annotations

from masabs.expr import TRUE
from masabs.formula import AG, AU, AX, And, Atom, Or


class Budget(Exception):
    """Raised when path enumeration exceeds its step budget."""


class LassoEvaluator:
    def __init__(self, M, strict_until=False, budget=200_000):
        self.M = M
        self.strict = strict_until
        self.budget = budget
        self.steps = 0
        self.memo = {}

    def holds(self, f, s) -> bool:
        key = (f, s)
        if key not in self.memo:
            self.memo[key] = self._eval(f, s)
        return self.memo[key]

    def _eval(self, f, s) -> bool:
        M = self.M
        if isinstance(f, Atom):
            return True if f.expr == TRUE else bool(M.atom_values[f.expr][s])
        if isinstance(f, And):
            return self.holds(f.left, s) and self.holds(f.right, s)
        if isinstance(f, Or):
            return self.holds(f.left, s) or self.holds(f.right, s)
        if isinstance(f, AX):
            return all(self.holds(f.arg, t) for t in M.succ[s])
        if isinstance(f, AG):
            # a violating path: simple path ending in a state where arg fails
            return not self._some_path(s, lambda u: self.holds(f.arg, u), lambda u: False)
        if isinstance(f, AU):
            if self.strict:
                # the strict reading asks for the until from every successor
                if self.holds(f.right, s):
                    return True
                return all(not self._until_violated(f, t) for t in M.succ[s])
            return not self._until_violated(f, s)
        raise TypeError(f)

    def _until_violated(self, f, s) -> bool:
        """Some path keeps ``left & !right`` and either reaches a state with
        neither or closes a cycle inside that region."""
        good = lambda u: self.holds(f.left, u) and not self.holds(f.right, u)  # noqa: E731
        done = lambda u: self.holds(f.right, u)  # noqa: E731
        return self._dfs(s, good, done, cycle_violates=True)

    def _some_path(self, s, ok, done) -> bool:
        return self._dfs(s, ok, done, cycle_violates=False)

    def _dfs(self, s, ok, done, cycle_violates) -> bool:
        """DFS over simple paths from ``s``.  A path stops being extended at
        a ``done`` state (satisfied).  Returns True when some path reaches a
        state that is neither ``ok`` nor ``done``, or (if ``cycle_violates``)
        closes a lasso whose states are all ``ok``."""
        if done(s):
            return False
        if not ok(s):
            return True
        on_path = {s}
        stack = [(s, iter(self.M.succ[s]))]
        while stack:
            u, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                stack.pop()
                on_path.discard(u)
                continue
            self.steps += 1
            if self.steps > self.budget:
                raise Budget
            if nxt in on_path:
                if cycle_violates:
                    return True
                continue
            if done(nxt):
                continue
            if not ok(nxt):
                return True
            on_path.add(nxt)
            stack.append((nxt, iter(self.M.succ[nxt])))
        return False


def brute_sat(M, f, strict_until=False, budget=200_000) -> list:
    ev = LassoEvaluator(M, strict_until, budget)
    return [ev.holds(f, s) for s in range(M.n_states)]


def brute_holds(M, f, budget=200_000) -> bool:
    ev = LassoEvaluator(M, False, budget)
    return all(ev.holds(f, s) for s in M.initial)


def _freeze(env):
    return tuple(sorted(env.items()))


def explore(S, closure=True):
    """Direct product-semantics exploration of a MAS graph.

    Works on agent edges and dict environments only (no combined graph, no
    compiled layout).  Returns ``(states, succ, initial)`` with states as
    ``(location tuple, frozen env)`` and ``succ`` a dict state -> set.
    Dead states get a self-loop unless ``closure`` is false.
    """
    from masabs.expr import EvalError, eval_expr
    from masabs.lang import effect

    decls = S.decls()

    def enabled(e, env):
        try:
            return eval_expr(e.guard, env) is True
        except EvalError:
            return False

    def fire(updates, env):
        try:
            for u in updates:
                env = effect(u, env, decls)
        except EvalError:
            return None
        return env

    init = (tuple(a.l0 for a in S.agents), _freeze(S.initial_evaluation()))
    succ = {}
    todo = [init]
    while todo:
        st = todo.pop()
        if st in succ:
            continue
        loc, fenv = st
        env = dict(fenv)
        out = set()
        for i, A in enumerate(S.agents):
            for e in A.edges_from(loc[i]):
                if e.sync is not None or not enabled(e, env):
                    continue
                new = fire([e.update], env)
                if new is not None:
                    out.add((loc[:i] + (e.dst,) + loc[i + 1:], _freeze(new)))
        for i, A in enumerate(S.agents):
            for j, B in enumerate(S.agents):
                if i == j:
                    continue
                for es in A.edges_from(loc[i]):
                    if es.sync is None or es.sync[0] != "!":
                        continue
                    for er in B.edges_from(loc[j]):
                        if er.sync != ("?", es.sync[1]):
                            continue
                        if not (enabled(es, env) and enabled(er, env)):
                            continue
                        new = fire([es.update, er.update], env)
                        if new is None:
                            continue
                        l2 = list(loc)
                        l2[i], l2[j] = es.dst, er.dst
                        out.add((tuple(l2), _freeze(new)))
        if not out and closure:
            out.add(st)
        succ[st] = out
        todo.extend(out)
    return set(succ), succ, {init}


def model_graph(M):
    """``(states, succ, initial)`` of an unwrapped model in the same shape as
    :func:`explore`."""
    key = [(M.locations[s], _freeze(M.env(s))) for s in range(M.n_states)]
    succ = {key[s]: {key[t] for t in M.succ[s]} for s in range(M.n_states)}
    return set(key), succ, {key[s] for s in M.initial}
