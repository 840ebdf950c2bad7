"""Random small systems, abstractions, models and formulas for property tests."""
from __future__ import annotations

import random
from dataclasses import dataclass

from .abstraction import Mapping, make_mapping, make_scoped
from .expr import TRUE, Binary, Const, Expr, LocRef, Var, neg
from .formula import AG, AU, AX, TOP, And, Atom, Formula, Or
from .lang import AgentGraph, Assign, Edge, MASGraph, VarDecl
from .unwrapping import Model


@dataclass(frozen=True)
class GenParams:
    max_agents: int = 3
    max_locations: int = 4
    max_vars: int = 3
    max_domain: int = 3  # values per variable
    max_channels: int = 2
    max_edges: int = 5


def random_mas(rng: random.Random, p: GenParams = GenParams()) -> MASGraph:
    n_agents = rng.randint(1, p.max_agents)
    n_chans = rng.randint(0, p.max_channels)
    chans = tuple(f"c{k}" for k in range(n_chans))
    names = [f"A{i}" for i in range(n_agents)]
    n_vars = rng.randint(1, p.max_vars)
    shared, local = [], {a: [] for a in names}
    for k in range(n_vars):
        size = rng.randint(2, p.max_domain)
        default = rng.randrange(size)
        if rng.random() < 0.25:
            shared.append(VarDecl(f"s{k}", 0, size - 1, default, shared=True))
        else:
            owner = rng.choice(names)
            local[owner].append(VarDecl(f"{owner}.v{k}", 0, size - 1, default))
    agents = []
    for a in names:
        locs = tuple(f"l{k}" for k in range(rng.randint(1, p.max_locations)))
        visible = local[a] + shared
        edges = []
        for _ in range(rng.randint(1, p.max_edges)):
            src, dst = rng.choice(locs), rng.choice(locs)
            guard = _guard(rng, visible)
            sync = None
            if chans and rng.random() < 0.4:
                sync = (rng.choice("!?"), rng.choice(chans))
            upd = tuple(_assign(rng, visible) for _ in range(rng.choice((0, 1, 1, 2))) if visible)
            edges.append(Edge(src, dst, guard, sync, upd))
        agents.append(AgentGraph(a, tuple(local[a]), locs, locs[0], tuple(edges)))
    return MASGraph(tuple(shared), tuple(agents), chans, None, "rand")


def _operand(rng, visible) -> Expr:
    if visible and rng.random() < 0.7:
        return Var(rng.choice(visible).name)
    return Const(rng.randint(0, 2))


def _guard(rng, visible) -> Expr:
    r = rng.random()
    if r < 0.4 or not visible:
        return TRUE
    op = rng.choice(("==", "!=", "<", "<="))
    g = Binary(op, Var(rng.choice(visible).name), _operand(rng, visible))
    if rng.random() < 0.2:
        g = Binary("&&", g, Binary("!=", Var(rng.choice(visible).name), Const(rng.randint(0, 2))))
    return g


def _assign(rng, visible) -> Assign:
    d = rng.choice(visible)
    r = rng.random()
    if r < 0.45:
        rhs: Expr = Const(rng.randint(d.lo, d.hi))
    elif r < 0.75:
        rhs = Var(rng.choice(visible).name)
    else:
        rhs = Binary("%", Binary("+", Var(rng.choice(visible).name), Const(1)), Const(d.hi + 1))
    return Assign(Var(d.name), rhs)


def random_abstraction(rng: random.Random, S: MASGraph):
    """A random removal, merge or scoped mapping on one agent, or None if
    no agent has local variables."""
    owners = [a for a in S.agents if a.vars]
    if not owners:
        return None
    A = rng.choice(owners)
    k = rng.randint(1, len(A.vars))
    sources = [v.name for v in rng.sample(list(A.vars), k)]
    kind = rng.choice(("remove", "merge", "scoped"))
    target = None
    fn = "constant"
    if kind != "remove" and rng.random() < 0.7:
        target = "z"
        fn = rng.choice(("parity", "identity", "interval", "constant", "random"))
        if fn == "identity" and k > 1:
            fn = "parity"
        if fn == "random":
            out = rng.randint(1, 2)
            table: dict = {}
            fn = lambda key: table.setdefault(key, rng.randint(0, out))  # noqa: E731
    m = make_mapping(S, A.name, sources, target, fn=fn, width=2)
    if kind != "scoped":
        return m
    scope = [l for l in A.locations if rng.random() < 0.5]
    return make_scoped(S, m, scope)


def sources_of(m) -> tuple:
    return (m if isinstance(m, Mapping) else m.mapping).sources


def random_atoms(rng: random.Random, S: MASGraph, kept, n: int = 2) -> list:
    """Boolean atoms over kept variables and locations."""
    decls = S.decls()
    kept = sorted(kept)
    out = []
    for _ in range(n):
        if kept and rng.random() < 0.7:
            v = decls[rng.choice(kept)]
            e: Expr = Binary(rng.choice(("==", "<=")), Var(v.name), Const(rng.randint(v.lo, v.hi)))
        else:
            i = rng.randrange(len(S.agents))
            e = LocRef(i, rng.choice(S.agents[i].locations), "")
        if rng.random() < 0.3:
            e = neg(e)
        out.append(e)
    return out


def random_formula(rng: random.Random, atoms: list, depth: int = 3) -> Formula:
    """Random ACTL formula over ``atoms`` with temporal nesting depth <= depth."""
    if depth == 0 or rng.random() < 0.2:
        return Atom(rng.choice(atoms + [TRUE]))
    r = rng.random()
    if r < 0.2:
        return AX(random_formula(rng, atoms, depth - 1))
    if r < 0.45:
        return AG(random_formula(rng, atoms, depth - 1))
    if r < 0.6:
        return AU(TOP, random_formula(rng, atoms, depth - 1))
    if r < 0.8:
        return AU(random_formula(rng, atoms, depth - 1), random_formula(rng, atoms, depth - 1))
    cls = And if rng.random() < 0.5 else Or
    return cls(random_formula(rng, atoms, depth - 1), random_formula(rng, atoms, depth - 1))


def random_model(rng: random.Random, n_states: int, n_atoms: int = 3, max_out: int = 2,
                 back_edge_prob: float = 0.15) -> Model:
    """Random serial LTS with atoms ``p0..`` and their complements ``q0..``.

    Mostly forward edges keep the number of simple paths small.
    """
    import numpy as np

    from .lang import Layout

    succ = []
    for s in range(n_states):
        k = rng.randint(1, max_out)
        ts = set()
        for _ in range(k):
            if s + 1 < n_states and rng.random() > back_edge_prob:
                ts.add(rng.randint(s + 1, min(n_states - 1, s + 4)))
            else:
                ts.add(rng.randint(0, s))
        succ.append(sorted(ts))
    values = {}
    for k in range(n_atoms):
        v = np.array([rng.random() < 0.5 for _ in range(n_states)], dtype=bool)
        values[Var(f"p{k}")], values[Var(f"q{k}")] = v, ~v
    names = tuple(values)
    return Model(Layout(()), (), [() for _ in range(n_states)], [() for _ in range(n_states)],
                 [0], succ, names, values)


__all__ = ["GenParams", "random_mas", "random_abstraction", "random_atoms", "random_formula",
           "random_model", "sources_of"]
