"""Command-line workbench.

Systems are given as ``.masg`` files or as generator shortcuts
``asv:NC`` and ``postal:NV,NC``.  Exit codes: 0 verdict true (or success),
1 verdict false, 2 error, 3 resource limit.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .abstraction import MAY, MUST, abstract_mas_report
from .bench import load_bench_config, run_bench
from .cases import gen_asv, gen_postal
from .checker import check
from .composition import combine
from .config import ConfigError, load_abstraction_config
from .domains import LOWER, UPPER, approx_local_domain, narrow
from .export import export_dot
from .formula import atoms, formula_vars, parse_formula
from .lang import MASGraph, ModelError
from .parser import ParseError, dump_mas, load_mas
from .simulation import check_simulation
from .unwrapping import DEFAULT_STATE_BUDGET, StateBudgetExceeded, dump_model, stats, unwrap

EXIT_TRUE, EXIT_FALSE, EXIT_ERROR, EXIT_LIMIT = 0, 1, 2, 3


def load_system(spec: str) -> MASGraph:
    if spec.startswith("asv:"):
        return gen_asv(int(spec[4:]))
    if spec.startswith("postal:"):
        nv, nc = spec[7:].split(",")
        return gen_postal(int(nv), int(nc))
    return load_mas(spec)


def _abstracted(args, S):
    if not getattr(args, "config", None):
        return S, None
    cfg = load_abstraction_config(args.config)
    mode = cfg.mode
    if args.may:
        mode = MAY
    elif args.must:
        mode = MUST
    report = abstract_mas_report(S, cfg.build(S), mode)
    if mode == MUST and not report.supported:
        for d in report.diagnostics:
            print(f"warning: {d}", file=sys.stderr)
    return report.system, report


def cmd_parse(args) -> int:
    S = load_system(args.system)
    if args.dump:
        print(dump_mas(S), end="")
    else:
        print(f"{S.name}: {len(S.agents)} agents, {len(S.all_vars())} variables, "
              f"{sum(len(a.edges) for a in S.agents)} edges")
    return EXIT_TRUE


def cmd_combine(args) -> int:
    G = combine(load_system(args.system), reachable_only=args.reachable)
    print(f"{len(G.locations)} locations, {len(G.edges)} edges")
    return EXIT_TRUE


def cmd_unwrap(args) -> int:
    S = load_system(args.system)
    M = unwrap(S, state_budget=args.budget)
    if args.stats:
        print(json.dumps(stats(M)))
    if args.json:
        dump_model(M, args.json)
    return EXIT_TRUE


def cmd_domain(args) -> int:
    S = load_system(args.system)
    names = [_qualified(S, v) for v in args.vars.split(",")]
    d = approx_local_domain(combine(S, reachable_only=True), names, args.mode)
    if args.agent:
        i = S.agent_index(args.agent)
        n = narrow(d, i, S.agents[i].locations)
        out = {"mode": d.mode, "vars": list(n.vars), "agent": args.agent,
               "table": {l: sorted(list(v) for v in vals) for l, vals in n.table.items()}}
        print(json.dumps(out, indent=1))
    else:
        print(d.dumps())
    return EXIT_TRUE


def _qualified(S, name):
    decls = S.decls()
    if name in decls:
        return name
    hits = [n for n in decls if n.endswith("." + name)]
    if len(hits) != 1:
        raise ModelError(f"unknown or ambiguous variable {name!r}")
    return hits[0]


def cmd_abstract(args) -> int:
    S = load_system(args.system)
    A, report = _abstracted(args, S)
    text = dump_mas(A)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        print(text, end="")
    if report is not None and report.mode == MUST:
        print(f"# must-abstraction supported: {report.supported}", file=sys.stderr)
    return EXIT_TRUE


def cmd_check(args) -> int:
    S = load_system(args.system)
    A, _ = _abstracted(args, S)
    f = parse_formula(args.formula, A)  # abstracted variables are undeclared here
    M = unwrap(A, atoms(f), state_budget=args.budget)
    v = check(M, f, strict_until=args.strict_until)
    out = {"holds": v.holds, "states": M.n_states}
    if not v.holds:
        out["witness"] = v.to_json()["witness"]
    print(json.dumps(out))
    return EXIT_TRUE if v.holds else EXIT_FALSE


def cmd_simulate(args) -> int:
    """Propositions: every location plus each ``--atom`` over kept variables."""
    S1, S2 = load_system(args.model1), load_system(args.model2)
    texts = args.atom or []
    f1 = [parse_formula(t, S1) for t in texts]
    f2 = [parse_formula(t, S2) for t in texts]
    if args.keep is not None:
        keep = {_qualified(S1, v) for v in args.keep.split(",") if v}
        bad = [t for t, f in zip(texts, f1) if not formula_vars(f) <= keep]
        if bad:
            raise ModelError(f"atoms {bad} mention variables outside --keep")
    M1 = unwrap(S1, [a for f in f1 for a in atoms(f)], state_budget=args.budget)
    M2 = unwrap(S2, [a for f in f2 for a in atoms(f)], state_budget=args.budget)
    AP = {(a, l) for M in (M1, M2) for loc in set(M.locations) for a, l in zip(M.agent_names, loc)}
    AP |= {a for f in f1 for a in atoms(f)}
    r = check_simulation(M1, M2, AP)
    print(json.dumps({"found": r.found, "blocking": r.blocking, "reason": r.reason}))
    return EXIT_TRUE if r.found else EXIT_FALSE


def cmd_bench(args) -> int:
    cfg = load_bench_config(args.config)
    rows = run_bench(cfg)
    for r in rows:
        print(",".join(str(x) for x in r.csv_row()))
    return EXIT_LIMIT if any(r.memout for r in rows) else EXIT_TRUE


def cmd_export(args) -> int:
    S = load_system(args.system)
    if args.what == "combined":
        obj = combine(S)
    elif args.what == "model":
        obj = unwrap(S, state_budget=args.budget)
    else:
        obj = S.agents[S.agent_index(args.what)]
    export_dot(obj, args.output)
    return EXIT_TRUE


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="masabs", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    def budget(sp):
        sp.add_argument("--budget", type=int, default=DEFAULT_STATE_BUDGET, help="state budget")

    def abstraction(sp):
        sp.add_argument("--config", help="abstraction TOML file")
        g = sp.add_mutually_exclusive_group()
        g.add_argument("--may", action="store_true")
        g.add_argument("--must", action="store_true")

    sp = sub.add_parser("parse", help="parse a system")
    sp.add_argument("system")
    sp.add_argument("--dump", action="store_true", help="print the normalised system")
    sp.set_defaults(fn=cmd_parse)

    sp = sub.add_parser("combine", help="build the combined graph")
    sp.add_argument("system")
    sp.add_argument("--reachable", action="store_true")
    sp.set_defaults(fn=cmd_combine)

    sp = sub.add_parser("unwrap", help="explore the state space")
    sp.add_argument("system")
    sp.add_argument("--stats", action="store_true")
    sp.add_argument("--json", help="write the model as JSON")
    budget(sp)
    sp.set_defaults(fn=cmd_unwrap)

    sp = sub.add_parser("approx-domain", help="approximate local domains")
    sp.add_argument("system")
    sp.add_argument("--vars", required=True, help="comma-separated variable names")
    sp.add_argument("--mode", choices=(UPPER, LOWER), default=UPPER)
    sp.add_argument("--agent", help="narrow to this agent")
    sp.set_defaults(fn=cmd_domain)

    sp = sub.add_parser("abstract", help="abstract a system")
    sp.add_argument("system")
    abstraction(sp)
    sp.add_argument("-o", "--output")
    sp.set_defaults(fn=cmd_abstract)

    sp = sub.add_parser("check", help="model check a formula")
    sp.add_argument("system")
    sp.add_argument("--formula", required=True)
    sp.add_argument("--strict-until", action="store_true")
    abstraction(sp)
    budget(sp)
    sp.set_defaults(fn=cmd_check)

    sp = sub.add_parser("simulate", help="does model2 simulate model1?")
    sp.add_argument("model1")
    sp.add_argument("model2")
    sp.add_argument("--keep", help="comma-separated kept variables; atoms must stay within them")
    sp.add_argument("--atom", action="append", help="extra proposition (boolean expression)")
    budget(sp)
    sp.set_defaults(fn=cmd_simulate)

    sp = sub.add_parser("bench", help="run a benchmark grid")
    sp.add_argument("--config", required=True)
    sp.set_defaults(fn=cmd_bench)

    sp = sub.add_parser("export-dot", help="write Graphviz DOT")
    sp.add_argument("system")
    sp.add_argument("--what", default="combined", help="combined | model | AGENT")
    sp.add_argument("-o", "--output", required=True)
    budget(sp)
    sp.set_defaults(fn=cmd_export)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except (StateBudgetExceeded, MemoryError) as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_LIMIT
    except (ParseError, ModelError, ConfigError, KeyError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
