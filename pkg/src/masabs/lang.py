"""MAS-graph data model: declarations, edges, agent graphs, evaluation helpers."""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Mapping, Optional

from .expr import (FALSE, TRUE, ArrayLit, Binary, Call, Const, EvalError, Expr, Index,
                   LitIndex, LocRef, TableApply, Unary, Var, eval_expr, substitute, tdiv,
                   tmod, vars_of, conj)

log = logging.getLogger(__name__)


class ModelError(Exception):
    """Structurally invalid MAS graph (bad names, domains, initial condition...)."""


@dataclass(frozen=True)
class VarDecl:
    name: str
    lo: int
    hi: int
    default: object = None  # int, or tuple for arrays; None means lo
    size: Optional[int] = None  # None for scalars
    base: int = 0  # lowest array index
    shared: bool = False

    def __post_init__(self):
        if self.lo > self.hi:
            raise ModelError(f"{self.name}: empty domain {self.lo}..{self.hi}")
        if self.size is not None and self.size < 1:
            raise ModelError(f"{self.name}: array length must be >= 1")
        d = self.default
        if d is None:
            d = self.lo if self.size is None else (self.lo,) * self.size
        elif self.size is not None and isinstance(d, int):
            d = (d,) * self.size
        object.__setattr__(self, "default", d)
        vals = (d,) if self.size is None else d
        if self.size is not None and len(vals) != self.size:
            raise ModelError(f"{self.name}: default has wrong length")
        if any(not self.lo <= v <= self.hi for v in vals):
            raise ModelError(f"{self.name}: default {d} outside {self.lo}..{self.hi}")

    @property
    def is_array(self) -> bool:
        return self.size is not None

    @property
    def cells(self) -> int:
        return 1 if self.size is None else self.size

    def values(self) -> Iterator:
        rng = range(self.lo, self.hi + 1)
        if self.size is None:
            return iter(rng)
        return itertools.product(rng, repeat=self.size)

    def domain_size(self) -> int:
        return (self.hi - self.lo + 1) ** self.cells

    def contains(self, v) -> bool:
        if self.size is None:
            return isinstance(v, int) and not isinstance(v, bool) and self.lo <= v <= self.hi
        return (isinstance(v, tuple) and len(v) == self.size
                and all(self.lo <= x <= self.hi for x in v))


@dataclass(frozen=True)
class Assign:
    target: Expr  # Var or Index
    rhs: Expr

    def __str__(self):
        return f"{self.target} := {self.rhs}"


@dataclass(frozen=True)
class Edge:
    src: object
    dst: object
    guard: Expr = TRUE
    sync: Optional[tuple] = None  # ('!', chan) | ('?', chan) | None
    update: tuple = ()  # tuple[Assign, ...]; () is tau
    provenance: tuple = ()

    def label(self) -> str:
        parts = []
        if self.guard != TRUE:
            parts.append(f"[{self.guard}]")
        if self.sync:
            parts.append(f"{self.sync[1]}{self.sync[0]}")
        if self.update:
            parts.append("; ".join(map(str, self.update)))
        return " ".join(parts) or "tau"

    def key(self):
        """Provenance-free identity, used to deduplicate edge copies."""
        return (self.src, self.dst, self.guard, self.sync, self.update)


@dataclass(frozen=True)
class AgentGraph:
    name: str
    vars: tuple  # local VarDecls, fully-qualified names
    locations: tuple
    l0: str
    edges: tuple

    def __post_init__(self):
        if self.l0 not in self.locations:
            raise ModelError(f"agent {self.name}: initial location {self.l0!r} undeclared")
        if len(set(self.locations)) != len(self.locations):
            raise ModelError(f"agent {self.name}: duplicate location")
        locs = set(self.locations)
        for e in self.edges:
            if e.src not in locs or e.dst not in locs:
                raise ModelError(f"agent {self.name}: edge {e.src}->{e.dst} uses unknown location")

    def edges_from(self, loc) -> list:
        return [e for e in self.edges if e.src == loc]

    def with_edges(self, edges: Iterable[Edge]) -> "AgentGraph":
        return replace(self, edges=dedupe_edges(edges))


def dedupe_edges(edges: Iterable[Edge]) -> tuple:
    seen = {}
    for e in edges:
        seen.setdefault(e.key(), e)
    return tuple(seen.values())


@dataclass(frozen=True)
class MASGraph:
    shared_vars: tuple
    agents: tuple
    channels: tuple = ()
    g0: Optional[Expr] = None
    name: str = "system"
    _init: dict = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        names = [v.name for v in self.all_vars()]
        dup = {n for n in names if names.count(n) > 1}
        if dup:
            raise ModelError(f"variable names not unique: {sorted(dup)}")
        anames = [a.name for a in self.agents]
        if len(set(anames)) != len(anames):
            raise ModelError("agent names not unique")
        if not self.agents:
            raise ModelError("a MAS graph needs at least one agent")
        object.__setattr__(self, "_init", self._initial())

    def all_vars(self) -> list:
        out = list(self.shared_vars)
        for a in self.agents:
            out.extend(a.vars)
        return sorted(out, key=lambda v: v.name)

    def decls(self) -> dict:
        return {v.name: v for v in self.all_vars()}

    def agent_index(self, name: str) -> int:
        for i, a in enumerate(self.agents):
            if a.name == name:
                return i
        raise KeyError(name)

    def owner(self, var: str) -> Optional[int]:
        """Index of the agent owning a local variable; None for shared ones."""
        for i, a in enumerate(self.agents):
            if any(v.name == var for v in a.vars):
                return i
        return None

    def layout(self) -> "Layout":
        lay = self.__dict__.get("_layout")
        if lay is None:
            lay = Layout(self.all_vars())
            object.__setattr__(self, "_layout", lay)
        return lay

    def initial_evaluation(self) -> dict:
        return dict(self._init)

    def g0_expr(self) -> Expr:
        """g0 as an expression; without an explicit one, the conjunction of
        ``v == default`` over all variables."""
        if self.g0 is not None:
            return self.g0
        parts = []
        for d in self.all_vars():
            val = ArrayLit(tuple(Const(v) for v in d.default)) if d.is_array else Const(d.default)
            parts.append(Binary("==", Var(d.name), val))
        return conj(*parts)

    def _initial(self) -> dict:
        decls = self.decls()
        env = {n: d.default for n, d in decls.items()}
        if self.g0 is None or self.g0 == TRUE:
            return env
        # variables not mentioned in g0 keep their declared defaults
        over = [decls[n] for n in sorted(vars_of(self.g0)) if n in decls]
        missing = vars_of(self.g0) - set(decls)
        if missing:
            raise ModelError(f"g0 mentions undeclared {sorted(missing)}")
        sols = sat(self.g0, over, base=env)
        if len(sols) != 1:
            raise ModelError(f"non-unique initial evaluation ({len(sols)} satisfy g0)")
        env.update(sols[0])
        return env

    def with_agents(self, agents, shared_vars=None) -> "MASGraph":
        return MASGraph(self.shared_vars if shared_vars is None else shared_vars,
                        tuple(agents), self.channels, self.g0, self.name)


# ---------------------------------------------------------------------------
# evaluations


def evaluations(over: Iterable[VarDecl]) -> Iterator[dict]:
    over = list(over)
    for combo in itertools.product(*(list(d.values()) for d in over)):
        yield {d.name: v for d, v in zip(over, combo)}


def sat(g: Expr, over: Iterable[VarDecl], base: Mapping | None = None) -> list:
    """All evaluations over ``over`` satisfying ``g``.

    Evaluations on which ``g`` faults are excluded (logged at debug level).
    ``base`` supplies values for variables outside ``over``.
    """
    out = []
    for env in evaluations(over):
        full = env if base is None else {**base, **env}
        try:
            ok = eval_expr(g, full)
        except EvalError as exc:
            log.debug("guard %s faults on %s: %s", g, env, exc)
            continue
        if ok is True:
            out.append(env)
    return out


def effect(u: tuple, env: Mapping, decls: Mapping | None = None) -> dict:
    """Apply the assignments of ``u`` left to right; ``()`` is the identity.

    With ``decls``, writes outside the declared domain raise EvalError.
    """
    out = dict(env)
    for a in u:
        val = eval_expr(a.rhs, out)
        if isinstance(val, bool) or not isinstance(val, int):
            raise EvalError(f"non-integer value assigned by {a}")
        tgt = a.target
        d = decls.get(tgt.name) if decls else None
        if d is not None and not d.lo <= val <= d.hi:
            raise EvalError(f"{a}: value {val} outside {d.lo}..{d.hi}")
        if isinstance(tgt, Var):
            out[tgt.name] = val
        else:
            arr = out[tgt.name]
            k = eval_expr(tgt.index, out)
            i = k - tgt.base
            if isinstance(k, bool) or not 0 <= i < len(arr):
                raise EvalError(f"{a}: index {k} out of bounds")
            out[tgt.name] = arr[:i] + (val,) + arr[i + 1:]
    return out


def expand_select(edge: Edge, binders: list) -> list:
    """Desugar ``select i:lo..hi`` binders into one edge copy per value."""
    if not binders:
        return [edge]
    names = [b[0] for b in binders]
    out = []
    for combo in itertools.product(*(range(lo, hi + 1) for _, lo, hi in binders)):
        vals = dict(zip(names, combo))
        guard = substitute(edge.guard, vals)
        if guard == FALSE:
            continue
        out.append(replace(edge, guard=guard, update=substitute(edge.update, vals)))
    return out


# ---------------------------------------------------------------------------
# flat vector layout and compilation


class Layout:
    """Fixed slot layout of all variables, lexicographic by qualified name."""

    def __init__(self, decls: Iterable[VarDecl]):
        self.decls = sorted(decls, key=lambda d: d.name)
        self.by_name = {d.name: d for d in self.decls}
        self.offset = {}
        self.slot_bounds = []
        off = 0
        for d in self.decls:
            self.offset[d.name] = off
            self.slot_bounds.extend([(d.lo, d.hi)] * d.cells)
            off += d.cells
        self.width = off
        self._compiled = {}

    def slots(self, name: str) -> range:
        d = self.by_name[name]
        o = self.offset[name]
        return range(o, o + d.cells)

    def slot_name(self, k: int) -> str:
        for d in self.decls:
            o = self.offset[d.name]
            if o <= k < o + d.cells:
                return d.name if d.size is None else f"{d.name}[{d.base + k - o}]"
        raise IndexError(k)

    def to_vector(self, env: Mapping) -> tuple:
        out = []
        for d in self.decls:
            v = env[d.name]
            out.extend(v if d.size is not None else (v,))
        return tuple(out)

    def to_env(self, vec) -> dict:
        env = {}
        for d in self.decls:
            o = self.offset[d.name]
            env[d.name] = vec[o] if d.size is None else tuple(vec[o:o + d.cells])
        return env

    def project(self, vec, names) -> tuple:
        """Vector over the slots of ``names`` (in layout order)."""
        return tuple(vec[k] for k in self.slots_of_names(names))

    def slots_of_names(self, names) -> list:
        out = []
        for d in self.decls:
            if d.name in names:
                out.extend(self.slots(d.name))
        return out

    # -- read/write sets at slot granularity --------------------------------

    def read_slots(self, r) -> set:
        out: set = set()
        self._reads(r, out)
        return out

    def _reads(self, x, out):
        t = type(x)
        if t is Var:
            out.update(self.slots(x.name))
        elif t is Index:
            k = self._const_cell(x)
            if k is not None:
                out.add(k)
            else:
                out.update(self.slots(x.name))
            self._reads(x.index, out)
        elif t is Assign:
            if isinstance(x.target, Index):
                self._reads(x.target.index, out)
            self._reads(x.rhs, out)
        elif isinstance(x, (tuple, list)):
            for y in x:
                self._reads(y, out)
        elif t is LitIndex:
            self._reads(x.index, out)
        elif t is Unary:
            self._reads(x.arg, out)
        elif t is Binary:
            self._reads(x.left, out)
            self._reads(x.right, out)
        elif t is ArrayLit:
            self._reads(x.items, out)
        elif t in (Call, TableApply):
            self._reads(x.args, out)

    def write_slots(self, a: Assign) -> set:
        tgt = a.target
        if isinstance(tgt, Var):
            return set(self.slots(tgt.name))
        k = self._const_cell(tgt)
        return {k} if k is not None else set(self.slots(tgt.name))

    def _const_cell(self, x: Index):
        if type(x.index) is Const and isinstance(x.index.value, int):
            i = x.index.value - x.base
            d = self.by_name[x.name]
            if 0 <= i < d.cells:
                return self.offset[x.name] + i
        return None

    # -- compilation to Python closures ---------------------------------------

    def compile_guard(self, g: Expr, with_loc: bool = False):
        """``fn(vec) -> bool`` (or ``fn(loc, vec)``); faults raise EvalError."""
        key = ("g", g, with_loc)
        if key not in self._compiled:
            self._compiled[key] = self._compile_guard(g, with_loc)
        return self._compiled[key]

    def _compile_guard(self, g: Expr, with_loc: bool):
        src = self._gen(g, "s")
        args = "l, s" if with_loc else "s"
        return _build(f"def _g({args}):\n    return {src}\n", "_g")

    def compile_update(self, u: tuple):
        """``fn(vec) -> vec`` applying ``u``; faults raise EvalError."""
        key = ("u", u)
        if key not in self._compiled:
            self._compiled[key] = self._compile_update(u)
        return self._compiled[key]

    def _compile_update(self, u: tuple):
        if not u:
            return None
        lines = ["def _u(s):", "    v = list(s)"]
        for a in u:
            d = self.by_name[a.target.name]
            lines.append(f"    t = {self._gen(a.rhs, 'v')}")
            lines.append(f"    if t.__class__ is not int or t < {d.lo} or t > {d.hi}: _oor(t)")
            tgt = a.target
            if isinstance(tgt, Var):
                lines.append(f"    v[{self.offset[tgt.name]}] = t")
            else:
                k = self._const_cell(tgt)
                if k is None:
                    idx = self._gen(tgt.index, "v")
                    lines.append(f"    v[_ix({idx}, {self.offset[tgt.name] - tgt.base}, "
                                 f"{tgt.base}, {d.cells})] = t")
                else:
                    lines.append(f"    v[{k}] = t")
        lines.append("    return tuple(v)")
        return _build("\n".join(lines) + "\n", "_u")

    def _gen(self, e: Expr, s: str) -> str:
        t = type(e)
        if t is Const:
            return repr(e.value)
        if t is Var:
            d = self.by_name[e.name]
            o = self.offset[e.name]
            if d.size is None:
                return f"{s}[{o}]"
            return f"tuple({s}[{o}:{o + d.cells}])"
        if t is Index:
            k = self._const_cell(e)
            if k is not None:
                return f"{s}[{k}]"
            d = self.by_name[e.name]
            if type(e.index) is Const:
                return "_err()"
            idx = self._gen(e.index, s)
            return f"{s}[_ix({idx}, {self.offset[e.name] - e.base}, {e.base}, {d.cells})]"
        if t is LitIndex:
            idx = self._gen(e.index, s)
            return f"{e.values!r}[_ix({idx}, {-e.base}, {e.base}, {len(e.values)})]"
        if t is ArrayLit:
            return "(" + "".join(self._gen(i, s) + ", " for i in e.items) + ")"
        if t is Unary:
            if e.op == "-":
                return f"(-{self._gen(e.arg, s)})"
            return f"(not {self._gen(e.arg, s)})"
        if t is Binary:
            a, b = self._gen(e.left, s), self._gen(e.right, s)
            op = e.op
            if op == "&&":
                return f"({a} and {b})"
            if op == "||":
                return f"({a} or {b})"
            if op == "imply":
                return f"((not {a}) or {b})"
            if op == "/":
                return f"_div({a}, {b})"
            if op == "%":
                return f"_mod({a}, {b})"
            return f"({a} {op} {b})"
        if t is Call:
            return f"sum({self._gen(e.args[0], s)})"
        if t is TableApply:
            table = dict(e.table)
            args = "(" + "".join(self._gen(a, s) + ", " for a in e.args) + ")"
            return f"_tbl({table!r}, {args})"
        if t is LocRef:
            return f"(l[{e.agent}] == {e.loc!r})"
        raise TypeError(e)


def _ix(i, off, base, n):
    if i.__class__ is not int or not base <= i < base + n:
        raise EvalError(f"index {i} out of bounds")
    return off + i


def _err():
    raise EvalError("constant index out of bounds")


def _oor(t):
    raise EvalError(f"assigned value {t!r} outside domain")


def _tbl(table, key):
    try:
        return table[key]
    except KeyError:
        raise EvalError(f"table undefined on {key}") from None


_NS = {"_ix": _ix, "_err": _err, "_oor": _oor, "_div": tdiv, "_mod": tmod, "_tbl": _tbl,
       "EvalError": EvalError}


def _build(src: str, name: str):
    ns = dict(_NS)
    exec(compile(src, "<masabs-compiled>", "exec"), ns)
    return ns[name]


# ---------------------------------------------------------------------------
# interval analysis (static fault detection)


class _MayFault(Exception):
    pass


def interval(e: Expr, decls: Mapping):
    """Sound value range of an integer expression, or raise _MayFault."""
    t = type(e)
    if t is Const:
        v = e.value
        if isinstance(v, tuple):
            return (min(v), max(v)) if v else (0, 0)
        return (int(v), int(v))
    if t is Var:
        d = decls[e.name]
        return (d.lo, d.hi)
    if t is Index:
        d = decls[e.name]
        lo, hi = interval(e.index, decls)
        if lo < d.base or hi >= d.base + d.cells:
            raise _MayFault
        return (d.lo, d.hi)
    if t is LitIndex:
        lo, hi = interval(e.index, decls)
        if lo < e.base or hi >= e.base + len(e.values):
            raise _MayFault
        sub = e.values[lo - e.base:hi - e.base + 1]
        return (min(sub), max(sub))
    if t is Unary:
        lo, hi = interval(e.arg, decls)
        return (-hi, -lo) if e.op == "-" else (0, 1)
    if t is Binary:
        a = interval(e.left, decls)
        b = interval(e.right, decls)
        op = e.op
        if op == "+":
            return (a[0] + b[0], a[1] + b[1])
        if op == "-":
            return (a[0] - b[1], a[1] - b[0])
        if op == "*":
            ps = [x * y for x in a for y in b]
            return (min(ps), max(ps))
        if op in ("/", "%"):
            if b[0] <= 0 <= b[1]:
                raise _MayFault
            m = max(abs(a[0]), abs(a[1]))
            return (-m, m)
        return (0, 1)
    if t is ArrayLit:
        rs = [interval(i, decls) for i in e.items]
        return (min(r[0] for r in rs), max(r[1] for r in rs))
    if t is Call:
        d = interval(e.args[0], decls)
        n = _array_len(e.args[0], decls)
        return (min(d[0] * n, d[0]), max(d[1] * n, d[1]))
    if t is TableApply:
        ranges = [interval(a, decls) for a in e.args]
        keys = {k for k, _ in e.table}
        n = 1
        for lo, hi in ranges:
            n *= hi - lo + 1
        if n > 4096 or any(k not in keys for k in
                           itertools.product(*(range(lo, hi + 1) for lo, hi in ranges))):
            raise _MayFault
        outs = [o for _, o in e.table]
        return (min(outs), max(outs))
    if t is LocRef:
        return (0, 1)
    raise TypeError(e)


def _array_len(e, decls):
    if type(e) is Var:
        return decls[e.name].cells
    if type(e) is Const and isinstance(e.value, tuple):
        return len(e.value)
    if type(e) is ArrayLit:
        return len(e.items)
    return 1


def never_faults(x, decls: Mapping) -> bool:
    """True if a guard or update provably cannot raise EvalError.

    Relies on every variable staying inside its declared domain, which holds
    as long as each assignment is itself fault-free.
    """
    try:
        if isinstance(x, tuple):
            for a in x:
                if isinstance(a.target, Index):
                    d = decls[a.target.name]
                    lo, hi = interval(a.target.index, decls)
                    if lo < d.base or hi >= d.base + d.cells:
                        return False
                lo, hi = interval(a.rhs, decls)
                d = decls[a.target.name]
                if lo < d.lo or hi > d.hi:
                    return False
            return True
        if isinstance(x, Assign):
            return never_faults((x,), decls)
        interval(x, decls)
        return True
    except _MayFault:
        return False
