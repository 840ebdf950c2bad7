"""Case-study generators: a simple coercion scenario and postal voting."""
from __future__ import annotations

from .abstraction import MAY, MUST, make_mapping, make_scoped
from .formula import parse_formula
from .lang import MASGraph
from .parser import parse_mas


def asv_text(NC: int = 3) -> str:
    if NC < 1:
        raise ValueError("NC must be at least 1")
    return f"""\
system asv {{
  const NC = {NC}
  shared sh : 0..NC
  chan show, refuse
}}

agent Voter {{
  var x : 0..NC
  loc idle, voted, obeyed, disobeyed
  init idle
  edge idle -> voted do x := i select i:1..NC
  edge voted -> obeyed sync show! do sh := x
  edge voted -> disobeyed sync refuse!
}}

agent Coercer {{
  var K_voted : 0..1 [1..NC]
  var K_refused : 0..1
  loc idle, halt
  init idle
  edge idle -> halt sync show? do K_voted[sh] := 1
  edge idle -> halt sync refuse? do K_refused := 1
}}
"""


def gen_asv(NC: int = 3) -> MASGraph:
    """Voter picks a candidate, then either shows the vote to the coercer or
    refuses; the coercer records what it learned."""
    return parse_mas(asv_text(NC))


ASV_FORMULAS = {
    "obey_known": "A[] (!obeyed || K_voted[x] == 1)",
    "refuse_known": "A[] (!disobeyed || K_refused == 1)",
    "eventually_known": "A<> (!(K_voted == [{zeros}]))",
}


def asv_formula(name: str, S: MASGraph):
    NC = S.decls()["Coercer.K_voted"].cells
    return parse_formula(ASV_FORMULAS[name].format(zeros=", ".join(["0"] * NC)), S)


# ---------------------------------------------------------------------------
# postal voting


def postal_text(NV: int, NC: int) -> str:
    if NV < 1 or NC < 1:
        raise ValueError("NV and NC must be at least 1")
    chans = ", ".join(f"{k}_{j}" for j in range(1, NV + 1) for k in ("dec", "pack", "ret"))
    auth = []
    for j in range(1, NV + 1):
        auth.append(f"  edge coll_dec -> coll_dec sync dec_{j}? do dec_recv[{j}] := msg_dec; msg_dec := 0")
    auth.append("  edge coll_dec -> send_ep")
    for j in range(1, NV + 1):
        auth.append(f"  edge send_ep -> send_ep [dec_recv[{j}] != 0 && pack_sent[{j}] == 0] "
                    f"sync pack_{j}! do pack_sent[{j}] := 1")
    auth.append("  edge send_ep -> coll_vts")
    for j in range(1, NV + 1):
        auth.append(f"  edge coll_vts -> coll_vts [pack_sent[{j}] == 1] "
                    f"sync ret_{j}? do tally[bal] := tally[bal] + 1; bal := 0")
    voters = []
    for j in range(1, NV + 1):
        voters.append(f"""\
agent Voter{j} {{
  var mem_dec : 0..2
  var mem_sg : 0..1
  var mem_vt : 0..NC
  loc idle, wait, has, voted
  init idle
  edge idle -> wait sync dec_{j}! do mem_dec := m; msg_dec := m select m:1..2
  edge wait -> has sync pack_{j}?
  edge has -> voted sync ret_{j}! do mem_sg := s; mem_vt := v; bal := s * v select s:0..1, v:0..NC
}}
""")
    body = "\n".join(auth)
    return f"""\
# msg_dec: 1 = ballot by post, 2 = pick up in person
# bal: candidate on the returned ballot, 0 when blank or the declaration is unsigned
system postal {{
  const NV = {NV}
  const NC = {NC}
  shared msg_dec : 0..2
  shared bal : 0..NC
  chan {chans}
}}

agent Authority {{
  var dec_recv : 0..2 [1..NV]
  var pack_sent : 0..1 [1..NV]
  var tally : 0..NV [0..NC]
  loc coll_dec, send_ep, coll_vts
  init coll_dec
{body}
}}

""" + "\n".join(voters)


def gen_postal(NV: int, NC: int) -> MASGraph:
    """Authority collecting declarations, dispatching election packages and
    tallying returned ballots, plus ``NV`` voters on per-voter channels."""
    return parse_mas(postal_text(NV, NC))


def postal_formula_text(name: str, NV: int, NC: int) -> str:
    if name == "bstuff":
        tallied = " + ".join(f"Authority.tally[{i}]" for i in range(1, NC + 1))
        return f"A[] ({tallied} <= sum(Authority.pack_sent) && sum(Authority.pack_sent) <= {NV})"
    if name == "dispatch":
        return f"A[] (coll_vts imply sum(Authority.pack_sent) == {NV})"
    raise KeyError(name)


def postal_formula(name: str, S: MASGraph):
    NV = len(S.agents) - 1
    NC = S.decls()["bal"].hi
    return parse_formula(postal_formula_text(name, NV, NC), S)


def postal_abstraction(S: MASGraph, variant: str) -> list:
    """Mappings of the three postal-voting abstractions.

    ``abstraction-1`` removes every voter's ``mem_sg`` and ``mem_vt``;
    ``abstraction-2`` drops ``mem_dec`` while a voter is at ``has`` or
    ``voted`` and the authority's ``dec_recv`` while at ``coll_vts``;
    ``abstraction-3`` applies both.
    """
    voters = [a.name for a in S.agents if a.name != "Authority"]
    one = [make_mapping(S, v, ["mem_sg", "mem_vt"]) for v in voters]
    two = [make_scoped(S, make_mapping(S, v, ["mem_dec"]), ["has", "voted"]) for v in voters]
    two.append(make_scoped(S, make_mapping(S, "Authority", ["dec_recv"]), ["coll_vts"]))
    table = {"concrete": [], "abstraction-1": one, "abstraction-2": two, "abstraction-3": one + two}
    if variant not in table:
        raise KeyError(f"unknown variant {variant!r}")
    return table[variant]


VARIANTS = ("concrete", "abstraction-1", "abstraction-2", "abstraction-3")
MODES = (MAY, MUST)
