"""Variable abstraction of agent graphs: removal, merging and scoped mappings.

A :class:`Mapping` replaces local variables ``X`` of one agent by a fresh
variable ``z = fn(X)`` (or by nothing, for plain removal).  A
:class:`ScopedMapping` does the same only while the agent is inside a set of
locations; outside, ``X`` is concrete again.

In may mode the domains come from the upper approximation and the result
over-approximates the concrete system; in must mode they come from the lower
approximation and the result under-approximates it whenever
:func:`must_support` accepts the abstraction.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Optional, Union

from .composition import combine
from .domains import LOWER, UPPER, NarrowedDomain, approx_local_domain, narrow
from .expr import (FALSE, TRUE, Binary, Const, EvalError, Expr, Index, TableApply, Var, conj,
                   disj, neg, substitute, vars_of)
from .lang import AgentGraph, Assign, Edge, MASGraph, ModelError, VarDecl, effect, never_faults

log = logging.getLogger(__name__)

MAY, MUST = "may", "must"
ENUMERATION_CAP = 100_000
STUTTER = ("stutter",)


@dataclass(frozen=True)
class Mapping:
    """``target := fn(sources)`` for local variables of agent ``owner``.

    ``table`` lists ``(key, value)`` pairs where ``key`` is the vector of
    source cells (variables by name, array cells in order).  A mapping
    without ``target`` removes its sources.
    """
    owner: str
    sources: tuple
    target: Optional[VarDecl] = None
    table: tuple = ()

    @cached_property
    def fn(self) -> dict:
        return dict(self.table)

    @property
    def table_name(self) -> str:
        return f"f_{self.target.name.replace('.', '_')}" if self.target else ""

    def apply(self, key: tuple) -> int:
        return self.fn[key]


@dataclass(frozen=True)
class ScopedMapping:
    mapping: Mapping
    scope: frozenset
    outside_default: Optional[int] = None
    reset_values: Optional[tuple] = None  # ((name, value), ...); default: initial values


Abstraction = Union[Mapping, ScopedMapping]


# ---------------------------------------------------------------------------
# building mappings


def _bucket(width):
    return lambda v: v // width


BUILTINS: dict = {
    "constant": None,  # needs a value, handled in make_mapping
    "identity": lambda v: v,
    "parity": lambda v: v % 2,
}


def make_mapping(S: MASGraph, owner: str, sources, target: Optional[str] = None,
                 lo: Optional[int] = None, hi: Optional[int] = None,
                 fn: Union[str, Callable, dict] = "constant", value: int = 0,
                 width: int = 2) -> Mapping:
    """Build a total mapping over the declared domains of ``sources``.

    ``fn`` is a built-in name (``constant``, ``identity``, ``parity``,
    ``interval``), a callable on the source key tuple, or an explicit dict.
    Built-ins other than ``constant`` act on the sum of the source cells.
    Unqualified names are resolved inside ``owner``.
    """
    S.agent_index(owner)
    decls = S.decls()
    names = tuple(sorted(_qualify(owner, s, decls) for s in sources))
    for n in names:
        if S.owner(n) != S.agent_index(owner):
            raise ModelError(f"{n} is not a local variable of {owner}")
    keys = list(itertools.product(*_cell_ranges(names, decls)))
    if target is None:
        return Mapping(owner, names, None, ())
    tname = target if "." in target else f"{owner}.{target}"
    if tname in decls:
        raise ModelError(f"target {tname} already declared")
    if callable(fn):
        f = fn
    elif isinstance(fn, dict):
        f = lambda k: fn[k]  # noqa: E731
    elif fn == "constant":
        f = lambda k: value  # noqa: E731
    elif fn == "interval":
        f = lambda k: sum(k) // width  # noqa: E731
    elif fn in BUILTINS:
        g = BUILTINS[fn]
        f = lambda k: g(sum(k))  # noqa: E731
    else:
        raise ValueError(f"unknown mapping function {fn!r}")
    table = []
    for k in keys:
        try:
            table.append((k, int(f(k))))
        except KeyError:
            raise ModelError(f"mapping for {tname} is not total: no value for {k}") from None
    outs = [v for _, v in table]
    lo = min(outs) if lo is None else lo
    hi = max(outs) if hi is None else hi
    if any(not lo <= v <= hi for v in outs):
        raise ModelError(f"mapping for {tname} leaves {lo}..{hi}")
    return Mapping(owner, names, VarDecl(tname, lo, hi), tuple(table))


def make_scoped(S: MASGraph, mapping: Mapping, scope, outside_default=None, reset_values=None):
    A = S.agents[S.agent_index(mapping.owner)]
    scope = frozenset(scope)
    unknown = scope - set(A.locations)
    if unknown:
        raise ModelError(f"scope of {mapping.owner} references unknown locations {sorted(unknown)}")
    reset = tuple(sorted(reset_values.items())) if reset_values else None
    return ScopedMapping(mapping, scope, outside_default, reset)


def _qualify(owner, name, decls):
    if name in decls:
        return name
    q = f"{owner}.{name}"
    if q in decls:
        return q
    raise ModelError(f"unknown variable {name!r} of {owner}")


def _cell_ranges(names, decls):
    out = []
    for n in names:
        d = decls[n]
        out.extend([range(d.lo, d.hi + 1)] * d.cells)
    return out


def _cells(names, decls):
    """(name, cell index or None) for every cell of ``names`` in key order."""
    out = []
    for n in sorted(names):
        d = decls[n]
        out.extend([(n, k) for k in range(d.cells)] if d.is_array else [(n, None)])
    return out


def _key(names, env, decls) -> tuple:
    out = []
    for n in sorted(names):
        v = env[n]
        out.extend(v if decls[n].is_array else (v,))
    return tuple(out)


def _env_of(names, vec, decls) -> dict:
    env, k = {}, 0
    for n in sorted(names):
        d = decls[n]
        if d.is_array:
            env[n] = tuple(vec[k:k + d.cells])
            k += d.cells
        else:
            env[n] = vec[k]
            k += 1
    return env


def _cell_expr(name, k, decls):
    d = decls[name]
    return Var(name) if k is None else Index(name, Const(d.base + k), d.base)


def _assign_cells(names, env, decls) -> tuple:
    out = []
    for n in sorted(names):
        d = decls[n]
        if d.is_array:
            out.extend(Assign(Index(n, Const(d.base + k), d.base), Const(v)) for k, v in enumerate(env[n]))
        else:
            out.append(Assign(Var(n), Const(env[n])))
    return tuple(out)


def _apply_expr(m: Mapping, decls):
    args = tuple(_cell_expr(n, k, decls) for n, k in _cells(m.sources, decls))
    return TableApply(m.table_name, tuple(sorted(m.table)), args)


# ---------------------------------------------------------------------------
# global mappings


def _expand_update(update, W, wenv, decls, maps):
    """Rewrite ``update`` for removed variables ``W`` holding ``wenv``.

    Returns a list of updates, one per branch of possible intermediate
    values of ``W``.  Writes to ``W`` are dropped; later reads see the value
    written, ranging non-``W`` operands over their declared domains.  Each
    mapping whose sources were written gets ``z := fn(final sources)``.
    """
    branches = [((), dict(wenv))]
    written = set()
    for a in update:
        tgt = a.target.name
        nxt = []
        if tgt in W:
            written.add(tgt)
            reads = vars_of(a.rhs) | (vars_of(a.target.index) if isinstance(a.target, Index) else frozenset())
            free = sorted(reads - W)
            for atoms, env in branches:
                for new in _write_images(a, free, env, W, decls):
                    nxt.append((atoms, new))
        else:
            for atoms, env in branches:
                nxt.append((atoms + (substitute(a, env),), env))
        branches = _dedupe(nxt)
    out = []
    for atoms, env in branches:
        tail = tuple(Assign(Var(m.target.name), Const(m.apply(_key(m.sources, env, decls))))
                     for m in maps if m.target is not None and written & set(m.sources))
        out.append(atoms + tail)
    return out


def _write_images(a, free, env, W, decls):
    sizes = 1
    for n in free:
        sizes *= decls[n].domain_size()
    if sizes > ENUMERATION_CAP:
        return _widened_write(a, env, decls)
    results = []
    for combo in itertools.product(*(list(decls[n].values()) for n in free)):
        full = dict(env)
        full.update(zip(free, combo))
        try:
            after = effect((a,), full, decls)
        except EvalError:
            continue  # the concrete edge is disabled for these values
        results.append({w: after[w] for w in W})
    return results


def _widened_write(a, env, decls):
    d = decls[a.target.name]
    log.warning("widening write %s: operand domain too large", a)
    out = []
    if isinstance(a.target, Index):
        idx = substitute(a.target.index, env)
        cells = [idx.value - d.base] if isinstance(idx, Const) and 0 <= idx.value - d.base < d.cells \
            else range(d.cells)
        for k in cells:
            for v in range(d.lo, d.hi + 1):
                arr = list(env[d.name])
                arr[k] = v
                out.append({**env, d.name: tuple(arr)})
    else:
        out = [{**env, d.name: v} for v in range(d.lo, d.hi + 1)]
    return out


def _dedupe(branches):
    seen, out = set(), []
    for atoms, env in branches:
        k = (atoms, tuple(sorted(env.items())))
        if k not in seen:
            seen.add(k)
            out.append((atoms, env))
    return out


def _target_guard(maps, env, decls) -> Expr:
    """``z == f(c)`` for every mapping with a non-constant target.

    The target always equals ``f`` of the concrete sources, so an edge
    instance for ``c`` can only fire where ``z`` agrees with ``f(c)``.
    """
    parts = []
    for m in maps:
        if m.target is None or m.target.lo == m.target.hi:
            continue
        if not all(n in env for n in m.sources):
            continue
        parts.append(Binary("==", Var(m.target.name), Const(m.apply(_key(m.sources, env, decls)))))
    return conj(*parts)


def _domain_at(d: NarrowedDomain, loc):
    if loc not in d.table:
        raise ModelError(f"local domain has no entry for location {loc!r}")
    return d.table[loc]


def merge_variables(A: AgentGraph, d: NarrowedDomain, maps, S: MASGraph, mode: str = MAY) -> AgentGraph:
    """Replace the sources of ``maps`` in agent ``A`` by their targets.

    ``d`` must track exactly the union of the sources.  Plain removal is the
    special case of mappings without target.
    """
    maps = list(maps)
    decls = S.decls()
    W = _check_disjoint(maps)
    if tuple(sorted(W)) != tuple(d.vars):
        raise ModelError(f"domain tracks {d.vars}, mappings abstract {sorted(W)}")
    edges = []
    for e in A.edges:
        for c in sorted(_domain_at(d, e.src)):
            env = _env_of(W, c, decls)
            g = substitute(e.guard, env)
            if g == FALSE:
                continue
            g = conj(g, _target_guard(maps, env, decls))
            for u in _expand_update(e.update, W, env, decls, maps):
                edges.append(Edge(e.src, e.dst, g, e.sync, u, e.provenance))
    if mode == MAY:
        edges.extend(_stutter_loops(A, d, W, maps, decls))
    init = S.initial_evaluation()
    kept = tuple(v for v in A.vars if v.name not in W)
    new = tuple(replace(m.target, default=m.apply(_key(m.sources, init, decls)))
                for m in maps if m.target is not None)
    return replace(A, vars=kept + new, edges=()).with_edges(edges)


def remove_variables(A: AgentGraph, V, d: NarrowedDomain, S: MASGraph, mode: str = MAY) -> AgentGraph:
    """Drop the local variables ``V`` from ``A`` using the domain ``d``."""
    return merge_variables(A, d, [Mapping(A.name, tuple(sorted(V)))], S, mode)


def _check_disjoint(maps) -> set:
    W = set()
    for m in maps:
        if W & set(m.sources):
            raise ModelError(f"overlapping source sets: {sorted(W & set(m.sources))}")
        W |= set(m.sources)
    return W


def _depends(e: Edge, W, decls) -> bool:
    """Could the enabledness of ``e`` differ between concrete and abstract?"""
    if vars_of(e.guard) & W:
        return True
    return not (never_faults(e.guard, decls) and never_faults(e.update, decls))


def _stutter_loops(A, d, W, maps, decls):
    """Idle self-loops keeping the serial closure of concrete deadlocks.

    A concrete state with no enabled edge gets a self-loop in the unwrapping.
    Its abstract counterpart may have enabled edges (guards evaluated for other
    values of ``W``), so it needs a way to stay put.  The loop at ``l`` is
    enabled whenever every safe local edge could be disabled for some value
    in ``d(l)``; it is only added where some edge from ``l`` depends on ``W``.
    """
    out = []
    for l in A.locations:
        vals = d.table.get(l, frozenset())
        here = A.edges_from(l)
        if not vals or not any(_depends(e, W, decls) for e in here):
            continue
        safe = [e for e in here if e.sync is None
                and never_faults(e.guard, decls) and never_faults(e.update, decls)]
        G = disj(*(conj(_target_guard(maps, _env_of(W, c, decls), decls),
                        *(neg(substitute(e.guard, _env_of(W, c, decls))) for e in safe))
                   for c in sorted(vals)))
        if G != FALSE:
            out.append(Edge(l, l, G, None, (), STUTTER))
    return out


# ---------------------------------------------------------------------------
# scoped mappings


def scoped_abstraction(A: AgentGraph, d: NarrowedDomain, smaps, S: MASGraph, mode: str = MAY) -> AgentGraph:
    """Apply mappings that are only active inside their scopes.

    Inside the scope of a mapping its sources hold their reset values and the
    target holds ``fn`` of the concrete values.  Edges entering a scope append
    the target update and the reset; edges leaving it prepend the assumed
    concrete values (one edge per value in ``d``) and the outside default.
    """
    smaps = list(smaps)
    decls = S.decls()
    init = S.initial_evaluation()
    W = _check_disjoint([s.mapping for s in smaps])
    if tuple(sorted(W)) != tuple(d.vars):
        raise ModelError(f"domain tracks {d.vars}, mappings abstract {sorted(W)}")
    for s in smaps:
        bad = s.scope - set(A.locations)
        if bad:
            raise ModelError(f"scope references unknown locations {sorted(bad)}")
    resets = {}
    for s in smaps:
        r = dict(s.reset_values or ())
        for n in s.mapping.sources:
            resets[n] = r.get(n, init[n])
    outside = {}
    for s in smaps:
        m = s.mapping
        if m.target is not None:
            f0 = m.apply(_key(m.sources, init, decls))
            outside[m.target.name] = f0 if s.outside_default is None else s.outside_default

    edges = []
    for e in A.edges:
        active = [s for s in smaps if e.src in s.scope or e.dst in s.scope]
        if not active:
            edges.append(e)
            continue
        in_src = [s for s in smaps if e.src in s.scope]
        reads = vars_of(e.guard) | vars_of(e.update)
        writes = {a.target.name for a in e.update}
        subst, restore, pre, post = set(), set(), [], []
        for s in active:
            X = set(s.mapping.sources)
            src_in, dst_in = e.src in s.scope, e.dst in s.scope
            if src_in and dst_in and not (writes & X):
                subst |= reads & X
            elif src_in:
                restore |= X
        relevant = subst | restore
        if in_src:
            dom = _domain_at(d, e.src)
            values = sorted({tuple(sorted((n, v) for n, v in _env_of(W, c, decls).items() if n in relevant))
                             for c in dom})
        else:
            values = [()]
        for cv in values:
            cenv = dict(cv)
            g = substitute(e.guard, {n: cenv[n] for n in subst | restore})
            if g == FALSE:
                continue
            g = conj(g, _target_guard([s.mapping for s in in_src], cenv, decls))
            pre = list(_assign_cells(restore, cenv, decls))
            post = []
            for s in active:
                m = s.mapping
                X = set(m.sources)
                src_in, dst_in = e.src in s.scope, e.dst in s.scope
                if src_in and not dst_in and m.target is not None:
                    pre.append(Assign(Var(m.target.name), Const(outside[m.target.name])))
                if dst_in and (not src_in or writes & X):
                    if m.target is not None:
                        post.append(Assign(Var(m.target.name), _apply_expr(m, decls)))
                    post.extend(_assign_cells(X, resets, decls))
            body = substitute(e.update, {n: cenv[n] for n in subst}) if subst else e.update
            edges.append(Edge(e.src, e.dst, g, e.sync, tuple(pre) + body + tuple(post), e.provenance))
    if mode == MAY:
        for s_group in _scope_groups(smaps, A):
            loc, group = s_group
            X = set().union(*(set(s.mapping.sources) for s in group))
            sub = NarrowedDomain(d.agent, d.vars, d.slots, {loc: d.table.get(loc, frozenset())})
            edges.extend(_stutter_loops_scoped(A, sub, W, X, [s.mapping for s in group], loc, decls))
    kept = []
    in0 = {s.mapping.target.name: A.l0 in s.scope for s in smaps if s.mapping.target is not None}
    for v in A.vars:
        if v.name in W and any(A.l0 in s.scope and v.name in s.mapping.sources for s in smaps):
            kept.append(replace(v, default=resets[v.name]))
        else:
            kept.append(v)
    new = []
    for s in smaps:
        m = s.mapping
        if m.target is None:
            continue
        f0 = m.apply(_key(m.sources, init, decls))
        new.append(replace(m.target, default=f0 if in0[m.target.name] else outside[m.target.name]))
    return replace(A, vars=tuple(kept) + tuple(new), edges=()).with_edges(edges)


def _scope_groups(smaps, A):
    for l in A.locations:
        group = [s for s in smaps if l in s.scope]
        if group:
            yield l, group


def _stutter_loops_scoped(A, d, W, X, maps, loc, decls):
    vals = d.table.get(loc, frozenset())
    here = A.edges_from(loc)
    if not vals or not any(_depends(e, X, decls) for e in here):
        return []
    safe = [e for e in here if e.sync is None
            and never_faults(e.guard, decls) and never_faults(e.update, decls)]
    parts = []
    for c in sorted(vals):
        env = {n: v for n, v in _env_of(W, c, decls).items() if n in X}
        parts.append(conj(_target_guard(maps, env, decls),
                          *(neg(substitute(e.guard, env)) for e in safe)))
    G = disj(*parts)
    return [Edge(loc, loc, G, None, (), STUTTER)] if G != FALSE else []


# ---------------------------------------------------------------------------
# whole systems


@dataclass
class AbstractionReport:
    system: MASGraph
    mode: str
    domains: dict = field(default_factory=dict)  # agent name -> NarrowedDomain per stage
    supported: bool = True
    diagnostics: list = field(default_factory=list)

    @property
    def stutter_loops(self) -> int:
        return sum(1 for a in self.system.agents for e in a.edges if e.provenance == STUTTER)


def abstract_mas(S: MASGraph, maps, mode: str = MAY) -> MASGraph:
    """Abstract ``S`` by the given mappings (see :func:`abstract_mas_report`)."""
    return abstract_mas_report(S, maps, mode).system


def abstract_mas_report(S: MASGraph, maps, mode: str = MAY) -> AbstractionReport:
    """Apply global mappings, then scoped mappings, agent by agent.

    Domains are approximated on the combined graph of the system being
    transformed (upper mode for may, lower for must) and narrowed to each
    owner.  In must mode the report says whether :func:`must_support`
    accepted every stage.
    """
    if mode not in (MAY, MUST):
        raise ValueError(f"unknown abstraction mode {mode!r}")
    maps = list(maps)
    glob = [m for m in maps if isinstance(m, Mapping)]
    scoped = [m for m in maps if isinstance(m, ScopedMapping)]
    report = AbstractionReport(S, mode)
    cur = S
    for stage, group in (("global", glob), ("scoped", scoped)):
        if not group:
            continue
        cur = _apply_stage(cur, group, mode, report, stage)
    report.system = cur
    return report


def _apply_stage(S, group, mode, report, stage):
    by_owner: dict = {}
    for m in group:
        owner = m.owner if isinstance(m, Mapping) else m.mapping.owner
        by_owner.setdefault(owner, []).append(m)
    G = combine(S, reachable_only=True)
    agents = list(S.agents)
    for owner, ms in by_owner.items():
        i = S.agent_index(owner)
        srcs = sorted(set().union(*(set(_mapping(m).sources) for m in ms)))
        dmode = UPPER if mode == MAY else LOWER
        d = narrow(approx_local_domain(G, srcs, dmode), i, S.agents[i].locations)
        report.domains[(stage, owner)] = d
        if mode == MUST:
            du = narrow(approx_local_domain(G, srcs, UPPER), i, S.agents[i].locations)
            diag = must_support(S, ms, d, du)
            if diag:
                report.supported = False
                report.diagnostics.extend(diag)
        if stage == "global":
            agents[i] = merge_variables(S.agents[i], d, ms, S, mode)
        else:
            agents[i] = scoped_abstraction(S.agents[i], d, ms, S, mode)
    init = S.initial_evaluation()
    shared = tuple(replace(v, default=init[v.name]) for v in S.shared_vars)
    fixed = []
    for A in agents:
        fixed.append(replace(A, vars=tuple(replace(v, default=init[v.name]) if v.name in init
                                           and not _abstracted(v.name, group) else v
                                           for v in A.vars)))
    return MASGraph(shared, tuple(fixed), S.channels, None, S.name)


def _mapping(m) -> Mapping:
    return m if isinstance(m, Mapping) else m.mapping


def _abstracted(name, group) -> bool:
    return any(name in _mapping(m).sources for m in group)


def must_support(S: MASGraph, maps, d_lower: NarrowedDomain, d_upper: NarrowedDomain) -> list:
    """Diagnostics explaining why a must-abstraction may not be simulated by
    the concrete system; an empty list means the construction is supported.

    Supported means: wherever the agent can be while a mapping is active, the
    abstracted variables have one known value (lower and upper domains agree
    on a singleton), and every write to them on edges leaving such a location
    is computed from abstracted variables and constants only.
    """
    decls = S.decls()
    out = []
    ms = list(maps)
    owner = _mapping(ms[0]).owner
    A = S.agents[S.agent_index(owner)]
    W = set().union(*(set(_mapping(m).sources) for m in ms))

    def active(l):
        return any(isinstance(m, Mapping) or l in m.scope for m in ms)

    if _inert(A, W, decls):
        # values of W never influence anything: any witnessed value will do
        for l in A.locations:
            if active(l) and d_upper[l] and not d_lower[l]:
                out.append(f"{owner}@{l}: no witnessed value of {sorted(W)}")
        return out
    for l in A.locations:
        if not active(l) or not d_upper[l]:
            continue
        lo, up = d_lower[l], d_upper[l]
        if len(up) != 1 or lo != up:
            out.append(f"{owner}@{l}: values of {sorted(W)} not pinned down "
                       f"(lower {sorted(lo)}, upper {sorted(up)})")
            continue
        for e in A.edges_from(l):
            for a in e.update:
                if a.target.name in W:
                    reads = vars_of(a.rhs) | (vars_of(a.target.index) if isinstance(a.target, Index)
                                              else frozenset())
                    if reads - W:
                        out.append(f"{owner}: {e.label()} writes {a.target.name} from {sorted(reads - W)}")
    return out


def _inert(A: AgentGraph, W, decls) -> bool:
    """No guard or surviving assignment of ``A`` reads ``W``, and writes to
    ``W`` cannot fault."""
    for e in A.edges:
        if vars_of(e.guard) & W:
            return False
        for a in e.update:
            if a.target.name in W:
                if not never_faults((a,), decls):
                    return False
            elif vars_of(a) & W:
                return False
    return True


def kept_variables(S: MASGraph, maps) -> set:
    """Variables of ``S`` left untouched by ``maps``."""
    gone = set().union(*(set(_mapping(m).sources) for m in maps)) if maps else set()
    return {v.name for v in S.all_vars()} - gone


def check_formula_vars(formula_vars, maps) -> None:
    gone = set().union(*(set(_mapping(m).sources) for m in maps)) if maps else set()
    clash = set(formula_vars) & gone
    if clash:
        raise ModelError(f"formula mentions abstracted variables {sorted(clash)}")


__all__ = [
    "MAY", "MUST", "Mapping", "ScopedMapping", "AbstractionReport", "make_mapping", "make_scoped",
    "merge_variables", "remove_variables", "scoped_abstraction", "abstract_mas",
    "abstract_mas_report", "must_support", "kept_variables", "check_formula_vars", "TRUE",
]
