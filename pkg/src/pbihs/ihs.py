"""The implicit hitting set loop."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable

from .certify import NullLogger, ProofLogger, VarManager
from .core import Instance, PbConstraint, at_least, cost
from .hs import BackendConfig, HittingSetSolver, export_core_set, IMPROVED, OPT_LB, OPTIMAL, optimal_sol_heuristic
from .opb import OPTIMUM, UNKNOWN, UNSATISFIABLE
from .oracle import CoreExtractor, Infeasible, Timeout
from .sls import SlsConfig, SlsState

log = logging.getLogger(__name__)

FORCE_OPT_EVERY = 1000


@dataclass
class RunConfig:
    backend: BackendConfig = field(default_factory=BackendConfig)
    sls: SlsConfig = field(default_factory=SlsConfig)
    seeding: bool = True
    time_limit: float | None = None
    seed: int = 0
    proof_path: str | None = None
    stats_path: str | None = None
    # debug: write the final core set with the objective as OPB
    hs_export_path: str | None = None
    force_opt_every: int = FORCE_OPT_EVERY

    def __post_init__(self):
        self.sls.seed = self.seed


@dataclass
class RunStats:
    iterations: int = 0
    cores: int = 0
    oracle_calls: int = 0
    hs_calls: dict = field(default_factory=dict)
    opt_calls: int = 0
    trajectory: list = field(default_factory=list)   # (lb, ub) after each iteration
    improving: list = field(default_factory=list)    # every incumbent cost, in order
    discrepancies: int = 0
    lb: int | None = None
    ub: int | None = None
    times: dict = field(default_factory=dict)        # wall seconds per component

    def lines(self):
        """Deterministic key=value lines (wall times are left out on purpose)."""
        out = [
            f"iterations={self.iterations}",
            f"cores={self.cores}",
            f"oracle_calls={self.oracle_calls}",
            f"opt_calls={self.opt_calls}",
        ]
        out += [f"hs_calls.{k}={v}" for k, v in sorted(self.hs_calls.items())]
        out += [f"discrepancies={self.discrepancies}", f"lb={self.lb}", f"ub={self.ub}"]
        out.append("trajectory=" + " ".join(f"{lb}:{ub}" for lb, ub in self.trajectory))
        out.append("improving=" + " ".join(str(c) for c in self.improving))
        return out


def write_stats(stats: RunStats, path):
    with open(path, "w") as fh:
        fh.write("\n".join(stats.lines()) + "\n")


@dataclass
class Observer:
    """Optional callbacks used by monitors and tests."""

    on_cores: Callable | None = None        # (list of PbConstraint)
    on_hs: Callable | None = None           # (HsResult, opt flag, cores)
    on_sls: Callable | None = None          # (gamma, cost, cores)
    on_reformulate: Callable | None = None  # (CgBackend)


@dataclass
class SolveResult:
    status: str
    assignment: dict | None
    cost: int | None
    stats: RunStats

    def __iter__(self):
        return iter((self.status, self.assignment, self.cost, self.stats))


def seed_cores(inst: Instance):
    """Input constraints that mention objective variables only, with their input ids."""
    ovars = inst.objective.vars
    return [(i, c) for i, c in enumerate(inst.constraints, start=1) if c.terms and c.vars <= ovars]


def ihs_solve(inst: Instance, cfg: RunConfig | None = None, proof_stream=None,
              observer: Observer | None = None) -> SolveResult:
    """Minimize ``inst`` by alternating core extraction and hitting-set optimization.

    ``proof_stream`` (or ``cfg.proof_path``) switches on proof logging.
    """
    cfg = cfg or RunConfig()
    if proof_stream is None and cfg.proof_path:
        with open(cfg.proof_path, "w") as fh:
            return ihs_solve(inst, cfg, fh, observer)
    observer = observer or Observer()
    start = time.monotonic()
    deadline = start + cfg.time_limit if cfg.time_limit is not None else None
    obj = inst.objective
    vars = VarManager(inst.nvars)
    logger = ProofLogger(proof_stream, inst, vars) if proof_stream is not None else NullLogger(vars)
    stats = RunStats()
    times = {"oracle": 0.0, "hs": 0.0}
    extractor = CoreExtractor(inst, logger if logger.enabled else None, deadline)
    best = None
    ub = lb = None

    def finish(status):
        stats.oracle_calls = extractor.calls
        stats.lb, stats.ub = lb, ub
        if hs is not None:
            stats.hs_calls = dict(hs.calls)
            stats.opt_calls = hs.opt_calls
            stats.discrepancies = len(hs.discrepancies)
        stats.times = {**times, "total": time.monotonic() - start}
        if cfg.stats_path:
            write_stats(stats, cfg.stats_path)
        if cfg.hs_export_path and hs is not None:
            export_core_set(hs.cores, obj, cfg.hs_export_path)
        c = cost(obj, best) if best is not None else None
        return SolveResult(status, best, c, stats)

    hs = None
    try:
        try:
            t = time.monotonic()
            alpha = extractor.check()
            times["oracle"] += time.monotonic() - t
        except Infeasible:
            logger.conclude_unsat()
            return finish(UNSATISFIABLE)
        best, ub = alpha, cost(obj, alpha)
        stats.improving.append(ub)
        logger.log_solution(alpha, ub)
        lb = obj.constant
        lb_id, lb_certified = None, True
        sls_state = SlsState(obj, cfg.sls) if cfg.backend.use_sls else None
        hs = HittingSetSolver(obj, vars, cfg.backend, logger, sls_state, deadline, observer.on_sls)
        for b in (hs.exact, hs.inexact):
            if b is not None and hasattr(b, "on_reformulate"):
                b.on_reformulate = observer.on_reformulate
        if cfg.seeding:
            seeded = []
            for i, c in seed_cores(inst):
                cid = logger.log_core(c, i)
                seeded.append(c.with_id(cid) if cid is not None else c)
            hs.add_cores(seeded)
            stats.cores += len(seeded)
        last_new, stagnant = None, 0
        while True:
            if lb >= ub:
                if cfg.backend.hybrid == OPT_LB and not lb_certified:
                    t = time.monotonic()
                    res = hs.confirm(ub, best)
                    times["hs"] += time.monotonic() - t
                    lb, lb_id, lb_certified = res.lower_bound_out, res.lb_proof_id, True
                    if lb < ub:
                        log.warning("certified bound %s is below the inexact one", lb)
                        continue
                break
            if deadline is not None and time.monotonic() > deadline:
                raise Timeout()
            stats.iterations += 1
            opt = (optimal_sol_heuristic(last_new, stagnant, cfg.backend.stagnation_limit)
                   or stats.iterations % cfg.force_opt_every == 0)
            t = time.monotonic()
            res = hs.solve_hs(lb, ub, opt, incumbent=best)
            times["hs"] += time.monotonic() - t
            if observer.on_hs is not None:
                observer.on_hs(res, opt, list(hs.cores))
            if res.lower_bound_out > lb:
                lb, lb_id, lb_certified = res.lower_bound_out, res.lb_proof_id, res.certified
                stagnant = 0
            else:
                stagnant += 1
            if lb >= ub:
                stats.trajectory.append((lb, ub))
                continue
            t = time.monotonic()
            found = extractor.extract_cores(res.solution)
            times["oracle"] += time.monotonic() - t
            c = cost(obj, found.witness)
            if c < ub:
                assert inst.is_solution(found.witness)
                best, ub = found.witness, c
                stats.improving.append(c)
                logger.log_solution(found.witness, c)
            new = [k.constraint for k in found.new_cores]
            if observer.on_cores is not None:
                observer.on_cores(new)
            hs.add_cores(new)
            stats.cores += len(new)
            last_new = len(new)
            stats.trajectory.append((lb, ub))
    except (Timeout, KeyboardInterrupt):
        return finish(UNKNOWN)
    if logger.enabled:
        if lb_id is None:
            # only reachable when the bound is the objective constant
            lb_id = logger.rup(at_least(obj, lb))
        logger.pol([lb_id, logger.best_solution_id, "+"])
        logger.conclude_optimal(ub)
    return finish(OPTIMUM)
