"""Command line: ``solve``, ``check`` and ``bench``."""

from __future__ import annotations

import argparse
import logging
import sys

from .bench import parse_configs, run_bench
from .certify import check
from .hs import BACKENDS, HYBRIDS, BackendConfig
from .ihs import RunConfig, ihs_solve
from .opb import OPTIMUM, SATISFIABLE, UNKNOWN, UNSATISFIABLE, OpbParseError, emit_result, parse_opb

EXIT_PROVEN, EXIT_SAT, EXIT_UNKNOWN, EXIT_ERROR = 0, 10, 20, 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_ERROR)


def build_parser():
    p = _Parser(prog="pbihs", description="Implicit hitting set solver for pseudo-Boolean optimization")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="minimize an OPB instance")
    s.add_argument("file")
    s.add_argument("--backend", choices=BACKENDS, default="cg")
    s.add_argument("--hybrid", choices=HYBRIDS, default="none")
    s.add_argument("--sls", choices=("on", "off"), default="off")
    s.add_argument("--proof", metavar="PATH")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--time-limit", type=float, metavar="S")
    s.add_argument("--cb-budget", type=int, default=100)
    s.add_argument("--stats", metavar="PATH", help="write key=value run statistics")
    s.add_argument("--dump-hs", metavar="PATH", help=argparse.SUPPRESS)

    c = sub.add_parser("check", help="verify a proof log against an instance")
    c.add_argument("file")
    c.add_argument("proof")

    b = sub.add_parser("bench", help="run a directory of instances under several configurations")
    b.add_argument("dir")
    b.add_argument("--configs", required=True,
                   help="comma-separated list of backend[/hybrid][+sls][+proof]")
    b.add_argument("--time-limit", type=float, required=True, metavar="S")
    b.add_argument("--out", required=True)
    b.add_argument("--seed", type=int, default=0)
    return p


def _read_instance(path):
    try:
        with open(path, "rb") as fh:
            return parse_opb(fh.read())
    except OpbParseError as e:
        print(f"{path}:{e.diagnostic}", file=sys.stderr)
    except OSError as e:
        print(f"cannot read {path}: {e}", file=sys.stderr)
    return None


def cmd_solve(args):
    inst = _read_instance(args.file)
    if inst is None:
        return EXIT_ERROR
    try:
        backend = BackendConfig(kind=args.backend, hybrid=args.hybrid, use_sls=args.sls == "on",
                                cb_budget=args.cb_budget)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    cfg = RunConfig(backend=backend, seed=args.seed, time_limit=args.time_limit,
                    proof_path=args.proof, stats_path=args.stats, hs_export_path=args.dump_hs)
    status, alpha, cost, stats = ihs_solve(inst, cfg)
    if status == UNKNOWN and alpha is not None:
        # interrupted or out of time with an incumbent
        print(f"c bounds lb={stats.lb} ub={stats.ub}")
        status = SATISFIABLE
    print(emit_result(status, cost, alpha, improving=stats.improving))
    return {OPTIMUM: EXIT_PROVEN, UNSATISFIABLE: EXIT_PROVEN, SATISFIABLE: EXIT_SAT}.get(status, EXIT_UNKNOWN)


def cmd_check(args):
    inst = _read_instance(args.file)
    if inst is None:
        return EXIT_ERROR
    try:
        with open(args.proof) as fh:
            text = fh.read()
    except OSError as e:
        print(f"cannot read {args.proof}: {e}", file=sys.stderr)
        return EXIT_ERROR
    res = check(inst, text)
    if res.accepted:
        print("s VERIFIED " + ("UNSATISFIABLE" if res.cost is None else f"OPTIMUM {res.cost}"))
        return EXIT_PROVEN
    print(f"s REJECTED at step {res.step}: {res.reason}")
    return EXIT_ERROR


def cmd_bench(args):
    try:
        configs = parse_configs(args.configs, seed=args.seed)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    _, summary = run_bench(args.dir, configs, args.time_limit, args.out)
    print(summary, end="")
    return EXIT_PROVEN


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="c %(message)s")
    return {"solve": cmd_solve, "check": cmd_check, "bench": cmd_bench}[args.cmd](args)


if __name__ == "__main__":
    sys.exit(main())
