"""Postal-voting grid next to the published state counts.

Runs bstuff under may-abstractions and dispatch under must-abstractions for
every variant, prints verdicts and state counts beside the reference numbers
and optionally writes all rows to CSV.

    python scripts/reproduce_tables.py --nv 4 --nc 3 --csv results/postal.csv
"""
import argparse
import csv
import logging
from pathlib import Path

from masabs.abstraction import MAY, MUST
from masabs.bench import BenchConfig, run_bench
from masabs.cases import VARIANTS

# published counts for the dispatch table; abstract counts do not vary with NC
REF_CONCRETE = {
    (1, 1): 23, (1, 2): 27, (1, 3): 31, (2, 1): 241, (2, 2): 369, (2, 3): 529,
    (3, 1): 2987, (3, 2): 6075, (3, 3): 10900, (4, 1): 39800, (4, 2): 106000, (4, 3): 236000,
}
REF_ABSTRACT = {
    "abstraction-1": {1: 15, 2: 81, 3: 459, 4: 2673},
    "abstraction-2": {1: 14, 2: 70, 3: 368, 4: 2002},
    "abstraction-3": {1: 14, 2: 70, 3: 368, 4: 2002},
}


def reference(variant, nv, nc):
    if variant == "concrete":
        return REF_CONCRETE.get((nv, nc))
    return REF_ABSTRACT[variant].get(nv)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nv", type=int, default=4)
    ap.add_argument("--nc", type=int, default=3)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--csv", type=Path)
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.ERROR)

    table = {}
    for formula, mode in (("bstuff", MAY), ("dispatch", MUST)):
        for v in VARIANTS:
            cfg = BenchConfig(nv=(1, args.nv), nc=(1, args.nc), variant=v, mode=mode,
                              formula=formula, workers=args.workers)
            for row in run_bench(cfg):
                table[(formula, v, row.NV, row.NC)] = row

    out = []
    for formula, mode in (("bstuff", MAY), ("dispatch", MUST)):
        print(f"\n{formula} ({mode} abstractions)")
        print(f"{'NV':>3} {'NC':>3} {'variant':<14} {'verdict':>8} {'states':>9} {'ref':>9} "
              f"{'ta ms':>9} {'tv ms':>9}")
        for nv in range(1, args.nv + 1):
            for nc in range(1, args.nc + 1):
                for v in VARIANTS:
                    r = table[(formula, v, nv, nc)]
                    ref = reference(v, nv, nc) if formula == "dispatch" else None
                    print(f"{nv:>3} {nc:>3} {v:<14} {str(r.verdict):>8} {str(r.states):>9} "
                          f"{'' if ref is None else ref:>9} {r.ta_ms:>9.1f} "
                          f"{'' if r.tv_ms is None else f'{r.tv_ms:.1f}':>9}")
                    out.append([formula, mode, nv, nc, v, r.verdict, r.states, ref,
                                round(r.ta_ms, 1), None if r.tv_ms is None else round(r.tv_ms, 1)])
    if args.csv:
        args.csv.parent.mkdir(parents=True, exist_ok=True)
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["formula", "mode", "NV", "NC", "variant", "verdict", "states",
                        "reference_states", "ta_ms", "tv_ms"])
            w.writerows(out)


if __name__ == "__main__":
    main()
