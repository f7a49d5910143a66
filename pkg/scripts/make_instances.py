"""Write generated OPB instances into a directory, ready for ``pbihs bench``.

    python3 scripts/make_instances.py bench_dir --family vc --sizes 20,40 --seeds 3
    pbihs bench bench_dir --configs cg,sis/optlb+proof --time-limit 30 --out results.csv
"""

import argparse
import pathlib
import random

from pbihs.gen import knapsack_conflicts, random_instance, vertex_cover
from pbihs.opb import write_opb

FAMILIES = {
    "vc": lambda rng, n: vertex_cover(rng, n, p=0.3),
    "ks": knapsack_conflicts,
    "random": lambda rng, n: random_instance(rng, max_vars=n, max_cons=n + n // 4, max_coef=10),
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("dir")
    ap.add_argument("--family", choices=sorted(FAMILIES), default="vc")
    ap.add_argument("--sizes", default="20,30,40")
    ap.add_argument("--seeds", type=int, default=2)
    args = ap.parse_args(argv)

    out = pathlib.Path(args.dir)
    out.mkdir(parents=True, exist_ok=True)
    for n in (int(x) for x in args.sizes.split(",")):
        for s in range(args.seeds):
            inst = FAMILIES[args.family](random.Random(1000 * n + s), n)
            (out / f"{args.family}{n}_{s}.opb").write_text(write_opb(inst))
    print(f"wrote {len(list(out.glob('*.opb')))} instances to {out}")


if __name__ == "__main__":
    main()
