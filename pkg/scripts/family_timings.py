"""Time every backend on the structured families, with and without proof logging.

    python3 scripts/family_timings.py --out family.csv

Writes one CSV row per (instance, backend) and prints the median
logged/plain ratio and the slowest run.
"""

import argparse
import csv
import io
import random
import statistics
import sys
import time

from pbihs.certify import check
from pbihs.gen import knapsack_conflicts, vertex_cover
from pbihs.hs import BackendConfig
from pbihs.ihs import RunConfig, ihs_solve


def instances(vc_sizes, ks_sizes, seeds, vc_p):
    for n in vc_sizes:
        for s in range(seeds):
            yield f"vc{n}_{s}", vertex_cover(random.Random(1000 * n + s), n, p=vc_p)
    for n in ks_sizes:
        for s in range(seeds):
            yield f"ks{n}_{s}", knapsack_conflicts(random.Random(1000 * n + s), n)


def timed(inst, cfg, out=None):
    t = time.monotonic()
    res = ihs_solve(inst, cfg, out)
    return res, time.monotonic() - t


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--vc-sizes", default="10,20,30,40,50,60")
    ap.add_argument("--ks-sizes", default="10,20,30,40,50")
    ap.add_argument("--seeds", type=int, default=2)
    ap.add_argument("--vc-p", type=float, default=0.3)
    ap.add_argument("--backends", default="sis,sis-reified,cg,cb")
    ap.add_argument("--time-limit", type=float, default=60.0)
    ap.add_argument("--check", action="store_true", help="also run the proof checker on every logged run")
    ap.add_argument("--out", default="-")
    args = ap.parse_args(argv)

    sizes = lambda s: [int(x) for x in s.split(",") if x]
    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    w = csv.writer(fh)
    w.writerow(["instance", "backend", "status", "cost", "plain_s", "logged_s", "ratio", "verdict"])
    ratios, slowest = [], 0.0
    for name, inst in instances(sizes(args.vc_sizes), sizes(args.ks_sizes), args.seeds, args.vc_p):
        for kind in args.backends.split(","):
            cfg = RunConfig(backend=BackendConfig(kind=kind), time_limit=args.time_limit)
            plain, tp = timed(inst, cfg)
            buf = io.StringIO()
            logged, tl = timed(inst, cfg, buf)
            verdict = ""
            if args.check:
                v = check(inst, buf.getvalue())
                verdict = f"OPT {v.cost}" if v.accepted else f"REJECTED {v.step}"
            ratios.append(tl / tp)
            slowest = max(slowest, tp, tl)
            w.writerow([name, kind, plain.status, plain.cost, f"{tp:.3f}", f"{tl:.3f}", f"{tl / tp:.2f}", verdict])
            fh.flush()
    print(f"median logged/plain {statistics.median(ratios):.2f}x, slowest run {slowest:.1f}s", file=sys.stderr)


if __name__ == "__main__":
    main()
