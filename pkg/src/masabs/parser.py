"""Reader and writer for the ``.masg`` text format.

Grammar (statements end at a newline; ``#`` starts a comment)::

    system [NAME] {
        const NAME = INT
        shared NAME : LO..HI [ '[' LO..HI | N ']' ] [= DEFAULT]
        chan NAME, NAME, ...
        table NAME { KEY -> INT; ... }          # KEY is INT or (INT, ...)
        init EXPR                               # optional g0
    }
    agent NAME {
        var NAME : LO..HI [ '[' ... ']' ] [= DEFAULT]
        loc NAME, NAME, ...
        init NAME
        edge SRC -> DST [ '[' GUARD ']' ] [sync C! | sync C?] [do UPD; UPD ...]
                        [select I:LO..HI, ...]
    }

Expressions use C-like operators (``+ - * / %``, comparisons, ``&& || !``,
``imply``), array indexing ``a[i]``, array literals ``[0, 1]`` and
``sum(a)``.  Locals are referred to by their short name inside their agent
and by ``Agent.name`` elsewhere.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .expr import (ArrayLit, Binary, Call, Const, Expr, Index, LitIndex, LocRef, TableApply,
                   Unary, Var, render, vars_of)
from .lang import Assign, AgentGraph, Edge, MASGraph, ModelError, VarDecl, expand_select


class ParseError(Exception):
    def __init__(self, msg, line=0, col=0):
        super().__init__(f"line {line}, column {col}: {msg}" if line else msg)
        self.line, self.col = line, col


@dataclass
class Tok:
    kind: str
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(r"""
    (?P<nl>\n)
  | (?P<ws>[ \t\r]+|\\\n)
  | (?P<comment>\#[^\n]*)
  | (?P<int>\d+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*)*)
  | (?P<op>->|:=|\.\.|==|!=|<=|>=|&&|\|\||<>|[-+*/%<>!?()\[\]{},;:=@])
""", re.VERBOSE)

KEYWORDS = {"system", "agent", "const", "shared", "var", "chan", "table", "init", "loc",
            "edge", "sync", "do", "select", "true", "false", "imply", "and", "or", "not"}


def tokenize(text: str) -> list:
    toks, pos, line, lstart = [], 0, 1, 0
    depth = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - lstart + 1)
        kind = m.lastgroup
        s = m.group()
        col = pos - lstart + 1
        if kind == "nl":
            if depth == 0:
                toks.append(Tok("nl", s, line, col))
            line += 1
            lstart = m.end()
        elif kind == "ws":
            if s.endswith("\n"):
                line += 1
                lstart = m.end()
        elif kind != "comment":
            if s in ("(", "["):
                depth += 1
            elif s in (")", "]"):
                depth = max(0, depth - 1)
            toks.append(Tok(kind, s, line, col))
        pos = m.end()
    toks.append(Tok("eof", "", line, pos - lstart + 1))
    return toks


class TokenStream:
    def __init__(self, toks):
        self.toks = toks
        self.i = 0

    @property
    def cur(self) -> Tok:
        return self.toks[self.i]

    def peek(self, k=1) -> Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, *texts) -> bool:
        t = self.cur
        return t.text in texts and t.kind in ("op", "name")

    def next(self) -> Tok:
        t = self.cur
        self.i += 1
        return t

    def expect(self, text) -> Tok:
        if not self.at(text):
            self.error(f"expected {text!r}, found {self.cur.text or self.cur.kind!r}")
        return self.next()

    def name(self) -> Tok:
        t = self.cur
        if t.kind != "name" or t.text in KEYWORDS:
            self.error(f"expected identifier, found {t.text or t.kind!r}")
        return self.next()

    def skip_nl(self):
        while self.cur.kind == "nl":
            self.i += 1

    def end_stmt(self):
        if self.cur.kind == "nl":
            self.skip_nl()
        elif not self.at("}") and self.cur.kind != "eof":
            self.error(f"unexpected {self.cur.text!r} at end of statement")

    def error(self, msg, tok=None):
        t = tok or self.cur
        raise ParseError(msg, t.line, t.col)


# ---------------------------------------------------------------------------
# expressions


class Scope:
    """Name resolution for expressions."""

    def __init__(self, decls: dict, consts=None, local_prefix=None, binders=None,
                 tables=None, locations=None, ambiguous=()):
        self.decls = decls
        self.consts = consts or {}
        self.prefix = local_prefix
        self.binders = binders or {}
        self.tables = tables or {}
        self.locations = locations or {}  # name -> LocRef
        self.ambiguous = set(ambiguous)  # location names shared by several agents

    def lookup(self, name: str, ts: TokenStream, tok: Tok):
        if name in self.binders:
            return ("binder", name)
        if self.prefix and f"{self.prefix}.{name}" in self.decls:
            return ("var", self.decls[f"{self.prefix}.{name}"])
        if name in self.decls:
            return ("var", self.decls[name])
        if name in self.consts:
            return ("const", self.consts[name])
        if name in self.locations:
            return ("loc", self.locations[name])
        matches = [d for n, d in self.decls.items() if n.endswith("." + name)]
        if len(matches) == 1 and self.prefix is None:
            return ("var", matches[0])
        if len(matches) > 1:
            ts.error(f"ambiguous identifier {name!r}", tok)
        if name in self.ambiguous:
            ts.error(f"ambiguous location {name!r}; qualify it as Agent.{name}", tok)
        ts.error(f"undeclared identifier {name!r}", tok)


_CMP = ("==", "!=", "<", "<=", ">", ">=")


def parse_expr(ts: TokenStream, scope: Scope) -> Expr:
    return _imply(ts, scope)


def _imply(ts, sc):
    left = _or(ts, sc)
    if ts.at("imply"):
        ts.next()
        return Binary("imply", left, _imply(ts, sc))
    return left


def _or(ts, sc):
    e = _and(ts, sc)
    while ts.at("||", "or"):
        ts.next()
        e = Binary("||", e, _and(ts, sc))
    return e


def _and(ts, sc):
    e = _not(ts, sc)
    while ts.at("&&", "and"):
        ts.next()
        e = Binary("&&", e, _not(ts, sc))
    return e


def _not(ts, sc):
    if ts.at("!", "not"):
        ts.next()
        return Unary("!", _not(ts, sc))
    return _cmp(ts, sc)


def _cmp(ts, sc):
    e = _add(ts, sc)
    if ts.at(*_CMP):
        op = ts.next().text
        e = Binary(op, e, _add(ts, sc))
    return e


def _add(ts, sc):
    e = _mul(ts, sc)
    while ts.at("+", "-"):
        op = ts.next().text
        e = Binary(op, e, _mul(ts, sc))
    return e


def _mul(ts, sc):
    e = _unary(ts, sc)
    while ts.at("*", "/", "%"):
        op = ts.next().text
        e = Binary(op, e, _unary(ts, sc))
    return e


def _unary(ts, sc):
    if ts.at("-"):
        ts.next()
        arg = _unary(ts, sc)
        if type(arg) is Const and isinstance(arg.value, int) and not isinstance(arg.value, bool):
            return Const(-arg.value)
        return Unary("-", arg)
    return _primary(ts, sc)


def _primary(ts, sc):
    t = ts.cur
    if t.kind == "int":
        ts.next()
        return Const(int(t.text))
    if ts.at("true", "false"):
        ts.next()
        return Const(t.text == "true")
    if ts.at("("):
        ts.next()
        e = parse_expr(ts, sc)
        ts.expect(")")
        return e
    if ts.at("["):
        ts.next()
        items = []
        if not ts.at("]"):
            items.append(parse_expr(ts, sc))
            while ts.at(","):
                ts.next()
                items.append(parse_expr(ts, sc))
        ts.expect("]")
        lit = ArrayLit(tuple(items))
        if ts.at("["):
            ts.next()
            idx = parse_expr(ts, sc)
            ts.expect("]")
            if not all(type(i) is Const for i in items):
                ts.error("indexing requires a constant array literal", t)
            return LitIndex(tuple(i.value for i in items), idx, 0)
        if all(type(i) is Const for i in items):
            return Const(tuple(i.value for i in items))
        return lit
    if t.kind == "name" and t.text not in KEYWORDS:
        ts.next()
        name = t.text
        if ts.at("(") and (name == "sum" or name in sc.tables):
            ts.next()
            args = [parse_expr(ts, sc)]
            while ts.at(","):
                ts.next()
                args.append(parse_expr(ts, sc))
            ts.expect(")")
            if name == "sum":
                if len(args) != 1:
                    ts.error("sum() takes one array argument", t)
                return Call("sum", tuple(args))
            return TableApply(name, sc.tables[name], tuple(args))
        kind, obj = sc.lookup(name, ts, t)
        if kind == "binder":
            node = Var(obj)
        elif kind == "const":
            node = Const(obj)
        elif kind == "loc":
            node = obj
        else:
            node = Var(obj.name)
        if ts.at("["):
            ts.next()
            idx = parse_expr(ts, sc)
            ts.expect("]")
            if kind != "var" or not obj.is_array:
                ts.error(f"{name!r} is not an array", t)
            return Index(obj.name, idx, obj.base)
        return node
    ts.error(f"unexpected {t.text or t.kind!r} in expression")


# ---------------------------------------------------------------------------
# typing


def infer(e: Expr, decls: dict, binders=()) -> object:
    """Return 'int', 'bool' or ('arr', n); raise ModelError on type errors."""
    t = type(e)
    if t is Const:
        v = e.value
        if isinstance(v, bool):
            return "bool"
        if isinstance(v, tuple):
            return ("arr", len(v))
        return "int"
    if t is Var:
        if e.name in binders:
            return "int"
        d = decls.get(e.name)
        if d is None:
            raise ModelError(f"undeclared identifier {e.name!r}")
        return ("arr", d.size) if d.is_array else "int"
    if t in (Index, LitIndex):
        if infer(e.index, decls, binders) != "int":
            raise ModelError(f"array index must be an integer in {render(e)}")
        return "int"
    if t is ArrayLit:
        for i in e.items:
            if infer(i, decls, binders) != "int":
                raise ModelError("array literal items must be integers")
        return ("arr", len(e.items))
    if t is Unary:
        a = infer(e.arg, decls, binders)
        want = "int" if e.op == "-" else "bool"
        if a != want:
            raise ModelError(f"type mismatch in {render(e)}")
        return want
    if t is Binary:
        a = infer(e.left, decls, binders)
        b = infer(e.right, decls, binders)
        op = e.op
        if op in ("+", "-", "*", "/", "%"):
            if a != "int" or b != "int":
                raise ModelError(f"type mismatch in {render(e)}")
            return "int"
        if op in ("&&", "||", "imply"):
            if a != "bool" or b != "bool":
                raise ModelError(f"type mismatch in {render(e)}")
            return "bool"
        if op in ("==", "!="):
            if a != b:
                raise ModelError(f"type mismatch in {render(e)}")
            return "bool"
        if a != "int" or b != "int":
            raise ModelError(f"type mismatch in {render(e)}")
        return "bool"
    if t is Call:
        a = infer(e.args[0], decls, binders)
        if not isinstance(a, tuple):
            raise ModelError("sum() expects an array")
        return "int"
    if t is TableApply:
        for a in e.args:
            if infer(a, decls, binders) != "int":
                raise ModelError(f"{e.name}() takes integer arguments")
        return "int"
    if t is LocRef:
        return "bool"
    raise TypeError(e)


# ---------------------------------------------------------------------------
# system files


def parse_mas(text: str) -> MASGraph:
    """Parse ``.masg`` source into a validated :class:`MASGraph`."""
    return _MasParser(text).parse()


def load_mas(path) -> MASGraph:
    with open(path, encoding="utf-8") as fh:
        return parse_mas(fh.read())


class _MasParser:
    def __init__(self, text):
        self.ts = TokenStream(tokenize(text))
        self.consts = {}
        self.tables = {}
        self.shared = []
        self.channels = []
        self.g0_toks = None
        self.agents_raw = []
        self.name = "system"

    def parse(self) -> MASGraph:
        ts = self.ts
        ts.skip_nl()
        seen_system = False
        while ts.cur.kind != "eof":
            if ts.at("system"):
                if seen_system:
                    ts.error("duplicate system block")
                seen_system = True
                self._system()
            elif ts.at("agent"):
                self._agent_header()
            else:
                ts.error(f"unknown construct {ts.cur.text!r}")
            ts.skip_nl()
        return self._build()

    # -- system block --------------------------------------------------------

    def _system(self):
        ts = self.ts
        ts.next()
        if ts.cur.kind == "name" and not ts.at("{"):
            self.name = ts.name().text
        self._open()
        while not ts.at("}"):
            if ts.at("const"):
                ts.next()
                n = ts.name().text
                ts.expect("=")
                self.consts[n] = self._int()
            elif ts.at("shared"):
                ts.next()
                self.shared.append(self._vardecl(None, shared=True))
            elif ts.at("chan"):
                ts.next()
                self.channels.append(ts.name().text)
                while ts.at(","):
                    ts.next()
                    self.channels.append(ts.name().text)
            elif ts.at("table"):
                ts.next()
                self._table()
            elif ts.at("init"):
                start = ts.next()
                toks = []
                while ts.cur.kind not in ("nl", "eof") and not ts.at("}"):
                    toks.append(ts.next())
                if not toks:
                    ts.error("empty init condition", start)
                self.g0_toks = toks + [Tok("eof", "", start.line, start.col)]
            else:
                ts.error(f"unknown construct {ts.cur.text!r} in system block")
            ts.end_stmt()
        ts.expect("}")

    def _open(self):
        self.ts.skip_nl()
        self.ts.expect("{")
        self.ts.skip_nl()

    def _int(self) -> int:
        ts = self.ts
        neg = False
        if ts.at("-"):
            ts.next()
            neg = True
        t = ts.cur
        if t.kind == "int":
            ts.next()
            v = int(t.text)
        elif t.kind == "name" and t.text in self.consts:
            ts.next()
            v = self.consts[t.text]
        else:
            ts.error(f"integer or constant expected, found {t.text!r}")
        return -v if neg else v

    def _range(self):
        lo = self._int()
        self.ts.expect("..")
        hi = self._int()
        return lo, hi

    def _vardecl(self, prefix, shared=False) -> VarDecl:
        ts = self.ts
        tok = ts.name()
        name = tok.text if prefix is None else f"{prefix}.{tok.text}"
        ts.expect(":")
        lo, hi = self._range()
        size, base = None, 0
        if ts.at("["):
            ts.next()
            a = self._int()
            if ts.at(".."):
                ts.next()
                b = self._int()
                base, size = a, b - a + 1
            else:
                size = a
            ts.expect("]")
        default = None
        if ts.at("="):
            ts.next()
            if ts.at("["):
                ts.next()
                vals = [self._int()]
                while ts.at(","):
                    ts.next()
                    vals.append(self._int())
                ts.expect("]")
                default = tuple(vals)
            else:
                default = self._int()
        try:
            return VarDecl(name, lo, hi, default, size, base, shared)
        except ModelError as exc:
            ts.error(str(exc), tok)

    def _table(self):
        ts = self.ts
        name = ts.name().text
        self._open()
        entries = []
        while not ts.at("}"):
            if ts.at("("):
                ts.next()
                key = [self._int()]
                while ts.at(","):
                    ts.next()
                    key.append(self._int())
                ts.expect(")")
                key = tuple(key)
            else:
                key = (self._int(),)
            ts.expect("->")
            entries.append((key, self._int()))
            if ts.at(";"):
                ts.next()
            ts.skip_nl()
        ts.expect("}")
        self.tables[name] = tuple(sorted(entries))

    # -- agent blocks --------------------------------------------------------

    def _agent_header(self):
        ts = self.ts
        ts.next()
        name = ts.name().text
        self._open()
        raw = {"name": name, "vars": [], "locs": [], "init": None, "edges": []}
        while not ts.at("}"):
            if ts.at("var"):
                ts.next()
                raw["vars"].append(self._vardecl(name))
            elif ts.at("loc"):
                ts.next()
                raw["locs"].append(ts.name().text)
                while ts.at(","):
                    ts.next()
                    raw["locs"].append(ts.name().text)
            elif ts.at("init"):
                ts.next()
                raw["init"] = ts.name().text
            elif ts.at("edge"):
                raw["edges"].append(self._edge_tokens())
            else:
                ts.error(f"unknown construct {ts.cur.text!r} in agent block")
            ts.end_stmt()
        ts.expect("}")
        self.agents_raw.append(raw)

    def _edge_tokens(self):
        # edges are resolved once every declaration is known
        ts = self.ts
        start = ts.next()
        toks = []
        while ts.cur.kind not in ("nl", "eof") and not ts.at("}"):
            toks.append(ts.next())
        return start, toks + [Tok("eof", "", start.line, start.col)]

    # -- resolution ----------------------------------------------------------

    def _build(self) -> MASGraph:
        decls = {d.name: d for d in self.shared}
        for raw in self.agents_raw:
            for d in raw["vars"]:
                if d.name in decls:
                    raise ParseError(f"duplicate variable {d.name}")
                decls[d.name] = d
        agents = []
        for raw in self.agents_raw:
            if not raw["locs"]:
                raise ParseError(f"agent {raw['name']} declares no locations")
            l0 = raw["init"] or raw["locs"][0]
            edges = []
            for start, toks in raw["edges"]:
                edges.extend(self._edge(raw, toks, decls))
            try:
                agents.append(AgentGraph(raw["name"], tuple(raw["vars"]), tuple(raw["locs"]),
                                         l0, tuple(edges)))
            except ModelError as exc:
                raise ParseError(str(exc), start.line if raw["edges"] else 0) from None
        g0 = None
        if self.g0_toks:
            ts = TokenStream(self.g0_toks)
            g0 = parse_expr(ts, Scope(decls, self.consts, tables=self.tables))
            if ts.cur.kind != "eof":
                ts.error(f"unexpected {ts.cur.text!r}")
            try:
                if infer(g0, decls) != "bool":
                    raise ModelError("init condition must be boolean")
            except ModelError as exc:
                raise ParseError(str(exc), self.g0_toks[0].line, self.g0_toks[0].col) from None
        try:
            return MASGraph(tuple(self.shared), tuple(agents), tuple(self.channels), g0, self.name)
        except ModelError as exc:
            raise ParseError(str(exc)) from None

    def _edge(self, raw, toks, decls):
        ts = TokenStream(toks)
        src = ts.name()
        ts.expect("->")
        dst = ts.name()
        for t in (src, dst):
            if t.text not in raw["locs"]:
                ts.error(f"unknown location {t.text!r}", t)
        # binders are declared at the end of the clause list; pre-scan for them
        binders = {}
        k = 0
        while k < len(toks):
            if toks[k].text == "select" and toks[k].kind == "name":
                j = k + 1
                while j + 4 < len(toks) and toks[j].kind == "name":
                    bname = toks[j].text
                    if f"{raw['name']}.{bname}" in decls or bname in decls:
                        raise ParseError(f"select binder {bname!r} shadows a variable",
                                         toks[j].line, toks[j].col)
                    sub = TokenStream(toks[j + 2:])
                    p = _MasParser.__new__(_MasParser)
                    p.ts, p.consts = sub, self.consts
                    lo, hi = p._range()
                    binders[bname] = (lo, hi)
                    j = j + 2 + sub.i
                    if toks[j].text == ",":
                        j += 1
                    else:
                        break
            k += 1
        scope = Scope(decls, self.consts, raw["name"], {b: b for b in binders}, self.tables)
        guard = Const(True)
        sync = None
        update = []
        while ts.cur.kind != "eof":
            t = ts.cur
            if ts.at("["):
                ts.next()
                guard = parse_expr(ts, scope)
                ts.expect("]")
            elif ts.at("sync"):
                ts.next()
                paren = ts.at("(")
                if paren:
                    ts.next()
                ch = ts.name()
                if ch.text not in self.channels:
                    ts.error(f"undeclared channel {ch.text!r}", ch)
                if not ts.at("!", "?"):
                    ts.error("expected '!' or '?' after channel")
                sync = (ts.next().text, ch.text)
                if paren:
                    ts.expect(")")
            elif ts.at("do"):
                ts.next()
                update.append(self._assign(ts, scope))
                while ts.at(";"):
                    ts.next()
                    if ts.cur.kind == "eof" or ts.at("select"):
                        break
                    update.append(self._assign(ts, scope))
            elif ts.at("select"):
                ts.next()
                while ts.cur.kind != "eof" and not ts.at("[", "sync", "do"):
                    ts.next()
            else:
                ts.error(f"unexpected {t.text!r} in edge")
        binder_names = set(binders)
        try:
            if infer(guard, decls, binder_names) != "bool":
                raise ModelError("guard must be boolean")
            for a in update:
                if infer(a.rhs, decls, binder_names) != "int":
                    raise ModelError(f"update {a} must assign an integer")
                if isinstance(a.target, Index):
                    infer(a.target, decls, binder_names)
                elif decls[a.target.name].is_array:
                    raise ModelError(f"whole-array assignment to {a.target.name} unsupported")
        except ModelError as exc:
            raise ParseError(str(exc), toks[0].line, toks[0].col) from None
        edge = Edge(src.text, dst.text, guard, sync, tuple(update))
        return expand_select(edge, [(b, lo, hi) for b, (lo, hi) in binders.items()])

    def _assign(self, ts, scope) -> Assign:
        t = ts.name()
        kind, obj = scope.lookup(t.text, ts, t)
        if kind != "var":
            ts.error(f"cannot assign to {t.text!r}", t)
        if ts.at("["):
            ts.next()
            idx = parse_expr(ts, scope)
            ts.expect("]")
            target = Index(obj.name, idx, obj.base)
        else:
            target = Var(obj.name)
        ts.expect(":=")
        return Assign(target, parse_expr(ts, scope))


# ---------------------------------------------------------------------------
# writer


def _decl_text(d: VarDecl, short: str, kw: str) -> str:
    s = f"{kw} {short} : {d.lo}..{d.hi}"
    if d.is_array:
        s += f" [{d.base}..{d.base + d.size - 1}]"
        s += " = [" + ", ".join(map(str, d.default)) + "]"
    else:
        s += f" = {d.default}"
    return s


def _collect_tables(S: MASGraph) -> dict:
    tables = {}

    def walk(x):
        if isinstance(x, TableApply):
            tables[x.name] = x.table
        for attr in ("index", "arg", "left", "right", "rhs", "target"):
            if hasattr(x, attr):
                walk(getattr(x, attr))
        for attr in ("args", "items"):
            if hasattr(x, attr):
                for y in getattr(x, attr):
                    walk(y)

    for a in S.agents:
        for e in a.edges:
            walk(e.guard)
            for u in e.update:
                walk(u)
    if S.g0 is not None:
        walk(S.g0)
    return tables


def dump_mas(S: MASGraph) -> str:
    """Serialize a MAS graph back to ``.masg`` text (qualified names)."""
    lines = [f"system {S.name} {{"]
    for d in S.shared_vars:
        lines.append("    " + _decl_text(d, d.name, "shared"))
    if S.channels:
        lines.append("    chan " + ", ".join(S.channels))
    for name, table in sorted(_collect_tables(S).items()):
        body = "; ".join(
            f"{k[0] if len(k) == 1 else '(' + ', '.join(map(str, k)) + ')'} -> {v}"
            for k, v in table)
        lines.append(f"    table {name} {{ {body} }}")
    if S.g0 is not None:
        lines.append(f"    init {render(S.g0)}")
    lines.append("}")
    for a in S.agents:
        lines.append("")
        lines.append(f"agent {a.name} {{")
        for d in a.vars:
            short = d.name[len(a.name) + 1:] if d.name.startswith(a.name + ".") else d.name
            lines.append("    " + _decl_text(d, short, "var"))
        lines.append("    loc " + ", ".join(a.locations))
        lines.append(f"    init {a.l0}")
        for e in a.edges:
            s = f"    edge {e.src} -> {e.dst}"
            if e.guard != Const(True):
                s += f" [{render(e.guard)}]"
            if e.sync:
                s += f" sync {e.sync[1]}{e.sync[0]}"
            if e.update:
                s += " do " + "; ".join(f"{render(u.target)} := {render(u.rhs)}" for u in e.update)
            lines.append(s)
        lines.append("}")
    return "\n".join(lines) + "\n"
