"""Time and peak memory of unwrapping a postal-voting instance.

    python scripts/unwrap_perf.py --nv 5 --nc 2
"""
import argparse
import json
import resource
import sys
import time

from masabs.cases import gen_postal
from masabs.unwrapping import unwrap


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--nv", type=int, default=5)
    p.add_argument("--nc", type=int, default=2)
    p.add_argument("--json", action="store_true", help="print one JSON object")
    args = p.parse_args(argv)
    S = gen_postal(args.nv, args.nc)
    t0 = time.perf_counter()
    M = unwrap(S)
    secs = time.perf_counter() - t0
    rss_mb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024  # KiB on Linux
    out = {"NV": args.nv, "NC": args.nc, "states": M.n_states, "transitions": M.n_transitions,
           "seconds": round(secs, 2), "peak_rss_mb": round(rss_mb, 1)}
    if args.json:
        print(json.dumps(out))
    else:
        for k, v in out.items():
            print(f"{k:12} {v}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
