"""Graphviz DOT export of agent graphs, combined graphs and models."""
from __future__ import annotations

from .composition import CombinedGraph
from .expr import TRUE, render
from .lang import AgentGraph, Edge
from .unwrapping import Model


def _q(s: str) -> str:
    return '"' + str(s).replace("\\", "\\\\").replace('"', '\\"') + '"'


def edge_label(e: Edge, provenance: bool = False) -> str:
    guard = "" if e.guard == TRUE else render(e.guard)
    sync = "" if e.sync is None else f"{e.sync[1]}{e.sync[0]}"
    upd = "; ".join(str(a) for a in e.update)
    label = f"{guard}:{sync}:{upd}"
    if provenance and e.provenance:
        label += " " + ",".join(f"{i}.{k}" for i, k in e.provenance if isinstance(i, int))
    return label


def to_dot(obj, name: str = "G") -> str:
    lines = [f"digraph {_q(name)} {{", "  rankdir=LR;"]
    if isinstance(obj, Model):
        for sid in range(obj.n_states):
            loc = ",".join(obj.locations[sid])
            vals = ",".join(map(str, obj.vectors[sid]))
            shape = "doublecircle" if sid in obj.initial else "circle"
            lines.append(f"  s{sid} [shape={shape}, label={_q(f'{sid}: {loc} | {vals}')}];")
        for s, ts in enumerate(obj.succ):
            for t in ts:
                lines.append(f"  s{s} -> s{t};")
    elif isinstance(obj, (AgentGraph, CombinedGraph)):
        locs = obj.locations
        ids = {l: f"n{k}" for k, l in enumerate(locs)}
        init = obj.l0
        prov = isinstance(obj, CombinedGraph)
        for l in locs:
            text = "_".join(l) if isinstance(l, tuple) else l
            shape = "doublecircle" if l == init else "circle"
            lines.append(f"  {ids[l]} [shape={shape}, label={_q(text)}];")
        for e in obj.edges:
            lines.append(f"  {ids[e.src]} -> {ids[e.dst]} [label={_q(edge_label(e, prov))}];")
    else:
        raise TypeError(f"cannot export {type(obj).__name__}")
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_dot(obj, path, name: str = "G") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(to_dot(obj, name))
