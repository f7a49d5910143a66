"""Hitting-set optimizers over the accumulated cores.

Every backend minimizes the objective subject to the core set ``K`` and
returns an :class:`HsResult`.  With proof logging on, an ``Optimal`` result
carries the id of a derived constraint ``objective >= cost``.

Backends:

* ``sis`` / ``sis-reified``: solution-improving search with an objective
  bound that is rebuilt per call, or reified and kept in one solver.
* ``cg``: core-guided search (OLL-style counting variables, stratification
  and hardening) with an incremental reformulated objective.
* ``cb``: core-boosted, i.e. CG for a bounded number of reformulations
  and SIS over the reformulated objective afterwards.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .certify import IMPLIED_BY, IMPLIES, EQUIV, NullLogger, reify_constraints
from .core import (
    Objective, PbConstraint, at_least, at_most, cost, lit_str, make_constraint, var,
)
from .oracle import Infeasible, PbSolver
from .sls import SlsState, sls_search, use_sls

log = logging.getLogger(__name__)

IMPROVED, OPTIMAL = "Improved", "Optimal"

SIS, SIS_REIFIED, CG, CB, SLS_ONLY = "sis", "sis-reified", "cg", "cb", "sls-only"
BACKENDS = (SIS, SIS_REIFIED, CG, CB)

NONE, OPT_LB, ALL_LB, FORCE_LB = "none", "optlb", "alllb", "forcelb"
HYBRIDS = (NONE, OPT_LB, ALL_LB, FORCE_LB)


@dataclass
class HsResult:
    solution: dict
    status: str
    lower_bound_out: int
    cost: int
    lb_proof_id: int | None = None
    certified: bool = False


@dataclass
class BackendConfig:
    kind: str = CG
    hybrid: str = NONE
    cb_budget: int = 100
    stratification: bool = True
    hardening: bool = True
    use_sls: bool = False
    # conflict budget of the inexact backend used by the hybrid modes
    inexact_conflicts: int = 2000
    stagnation_limit: int = 1000

    def __post_init__(self):
        if self.kind == SLS_ONLY:
            raise ValueError("local search alone cannot prove optimality; pick an exact backend")
        if self.kind not in BACKENDS:
            raise ValueError(f"unknown backend {self.kind!r}")
        if self.hybrid not in HYBRIDS:
            raise ValueError(f"unknown hybrid mode {self.hybrid!r}")
        if self.cb_budget < 0:
            raise ValueError("cb_budget must be non-negative")


def _project(model, variables):
    return {v: model.get(v, 0) for v in variables}


class _Backend:
    def __init__(self, objective: Objective, vars, logger=None):
        self.objective = objective
        self.vars = vars
        self.logger = logger if logger is not None else NullLogger(vars)
        self.cores: list[PbConstraint] = []
        self.obj_vars = sorted(objective.vars)
        self._spent = 0
        self.deadline = None
        # False for the budgeted backend used by the hybrid modes
        self.certified = True

    def add_core(self, c: PbConstraint):
        self.cores.append(c)

    def _solution_at_most(self, bound):
        """Some hitting set of cost <= bound (only used when no incumbent is known)."""
        s = PbSolver(self.vars.nvars)
        for c in self.cores:
            s.add_constraint(c)
        s.add_constraint(at_most(self.objective, bound))
        if not s.solve(deadline=self.deadline):
            raise Infeasible()
        self._spent += s.effort
        return _project(s.model, self.obj_vars)

    def _at_ub(self, ub, incumbent, lb_id):
        gamma = _project(incumbent, self.obj_vars) if incumbent is not None else self._solution_at_most(ub)
        return HsResult(gamma, OPTIMAL, ub, cost(self.objective, gamma), lb_id, self.certified)


class SisBackend(_Backend):
    """Solution-improving search: tighten ``objective <= ub - 1`` until UNSAT."""

    def __init__(self, objective, vars, logger=None, reified=True, conflict_budget=None, solver=None):
        super().__init__(objective, vars, logger)
        self.reified = reified
        self.conflict_budget = conflict_budget
        if reified:
            plog = self.logger if self.logger.enabled else None
            self.solver = solver if solver is not None else PbSolver(vars.nvars, logger=plog)
        else:
            self.solver = None

    @property
    def effort(self):
        return self._spent + (self.solver.effort if self.solver is not None else 0)

    def add_core(self, c):
        super().add_core(c)
        if self.reified:
            self.solver.add_constraint(c)

    def _below(self, objective, bound):
        """Look for a hitting set with ``objective <= bound - 1``.

        Returns (status, model, lb_id) with status True/False/None."""
        c = at_most(objective, bound - 1)
        sic = self.logger.log_reified_sic(objective, bound) if self.logger.enabled else None
        plog = self.logger if self.logger.enabled else None
        if self.reified:
            r = sic.var if sic else self.vars.register_fresh_var("sic")
            self.solver.ensure_vars(self.vars.nvars)
            self.solver.add_constraint(reify_constraints(r, IMPLIES, c)[0])
            res = self.solver.solve([r], conflict_budget=self.conflict_budget, deadline=self.deadline)
            solver = self.solver
        else:
            solver = PbSolver(self.vars.nvars, logger=plog, guard=[-sic.var] if sic else ())
            for k in self.cores:
                solver.add_constraint(k)
            solver.add_constraint(c)
            try:
                res = solver.solve(conflict_budget=self.conflict_budget, deadline=self.deadline)
            finally:
                self._spent += solver.effort
        if res is None:
            return None, None, None
        if res:
            return True, solver.model, None
        if solver.core is None:
            raise Infeasible()
        lb_id = self.logger.lower_bound_from_sic(sic, solver.core_id) if sic else None
        return False, None, lb_id

    def minimize(self, ub, require_opt=True, incumbent=None, objective=None):
        """Returns an :class:`HsResult`, or None if the conflict budget ran out
        before anything was found."""
        objective = objective or self.objective
        best = None
        bound = ub
        while True:
            status, model, lb_id = self._below(objective, bound)
            if status is None:
                if best is None:
                    return None
                return HsResult(best, IMPROVED, None, cost(self.objective, best))
            if status:
                gamma = _project(model, self.obj_vars)
                best = gamma
                c = cost(self.objective, gamma)
                if not require_opt:
                    return HsResult(gamma, IMPROVED, None, c)
                bound = cost(objective, model)
                continue
            if best is None:
                return self._at_ub(ub, incumbent, lb_id)
            return HsResult(best, OPTIMAL, bound, cost(self.objective, best), lb_id, self.certified)


@dataclass
class ReformulationState:
    """Reformulated objective ``O^R`` with ``O = O^R + inc`` on exact extensions."""

    weights: dict = field(default_factory=dict)   # lit -> residual weight
    inc: int = 0
    steps: list = field(default_factory=list)     # (weight, proof id of the step constraint)
    count: int = 0

    def objective(self, constant):
        terms = tuple(sorted(((w, l) for l, w in self.weights.items()), key=lambda t: var(t[1])))
        return Objective(terms, constant + self.inc)


class CgBackend(_Backend):
    """Core-guided minimization; with ``budget`` set it becomes core-boosted."""

    def __init__(self, objective, vars, logger=None, stratification=True, hardening=True, budget=None):
        super().__init__(objective, vars, logger)
        plog = self.logger if self.logger.enabled else None
        self.solver = PbSolver(vars.nvars, logger=plog)
        self.ref = ReformulationState(weights={l: w for w, l in objective.terms})
        self.stratification = stratification
        self.hardening = hardening
        self.budget = budget
        self._sis = None
        self.definitions = []   # solver-side counting-variable constraints
        self.on_reformulate = None

    @property
    def effort(self):
        return self._spent + self.solver.effort

    @property
    def lower_bound(self):
        return self.objective.constant + self.ref.inc

    def add_core(self, c):
        super().add_core(c)
        self.solver.add_constraint(c)

    def reformulated(self) -> Objective:
        return self.ref.objective(self.objective.constant)

    def _reformulate(self, lits, core_id):
        """Replace the core literals by counting variables o_2..o_k."""
        ref = self.ref
        wmin = min(ref.weights[l] for l in lits)
        for l in lits:
            ref.weights[l] -= wmin
            if ref.weights[l] == 0:
                del ref.weights[l]
        step_id = core_id
        outs = []
        for j in range(2, len(lits) + 1):
            o = self.vars.register_fresh_var(f"cnt{ref.count}_{j}")
            self.solver.ensure_vars(o)
            # o_j <=> sum(lits) + sum(~o_i, i<j) >= j, i.e. at least j core literals true
            c = make_constraint([(1, l) for l in lits] + [(1, -p) for p in outs], j)
            d = reify_constraints(o, IMPLIED_BY, c)[0]
            self.definitions.append(d)
            self.solver.add_constraint(d)
            if self.logger.enabled:
                fwd, _ = self.logger.reify(o, EQUIV, c)
                step_id = self.logger.pol([step_id, j - 1, "*", fwd, "+", j, "d"])
            outs.append(o)
            ref.weights[o] = wmin
        ref.inc += wmin
        ref.steps.append((wmin, step_id))
        ref.count += 1
        if self.on_reformulate is not None:
            self.on_reformulate(self)

    def _log_lb(self, extra=None):
        """Derive ``objective >= constant + inc`` (or add ``extra``, a bound on O^R)."""
        if not self.logger.enabled:
            return None
        toks = []

        def add(*items):
            toks.extend(items)
            if len(toks) > len(items):
                toks.append("+")

        for w, sid in self.ref.steps:
            add(sid, w, "*")
        if extra is not None:
            add(extra)
        else:
            for l, w in self.ref.weights.items():
                add(lit_str(l), w, "*")
        if not toks:
            return self.logger.rup(at_least(self.objective, self.objective.constant))
        return self.logger.pol(toks)

    def _over_budget(self, used):
        return self.budget is not None and used >= self.budget

    def minimize(self, ub, require_opt=True, incumbent=None):
        used = 0
        best = None
        ref = self.ref
        threshold = None
        while True:
            if self._over_budget(used):
                return self._boost(ub, require_opt, incumbent, best)
            weights = ref.weights
            if self.stratification and weights:
                if threshold is None:
                    threshold = max(weights.values())
                active = [l for l, w in weights.items() if w >= threshold]
            else:
                active = list(weights)
            if self.hardening:
                slack = ub - self.lower_bound
                active += [l for l, w in weights.items() if w < (threshold or 0) and w >= slack]
            res = self.solver.solve([-l for l in active], deadline=self.deadline)
            if res:
                gamma = _project(self.solver.model, self.obj_vars)
                c = cost(self.objective, gamma)
                if len(active) == len(weights):
                    assert c == self.lower_bound, (c, self.lower_bound)
                    return HsResult(gamma, OPTIMAL, c, c, self._log_lb(), self.certified)
                if best is None or c < cost(self.objective, best):
                    best = gamma
                if not require_opt and c < ub:
                    return HsResult(gamma, IMPROVED, None, c)
                lower = [w for w in weights.values() if w < threshold]
                threshold = max(lower)
                continue
            if not self.solver.core:
                raise Infeasible()
            self._reformulate(self.solver.core, self.solver.core_id)
            used += 1
            if self.lower_bound >= ub:
                # nothing cheaper than the incumbent exists
                return self._at_ub(ub, incumbent, self._log_lb())

    def _boost(self, ub, require_opt, incumbent, best):
        if self._sis is None:
            self._sis = SisBackend(self.objective, self.vars, self.logger, reified=True, solver=self.solver)
            self._sis.deadline = self.deadline
            self._sis.cores = self.cores
        res = self._sis.minimize(ub, require_opt, incumbent, objective=self.reformulated())
        if res.status == OPTIMAL and self.logger.enabled:
            res.lb_proof_id = self._log_lb(extra=res.lb_proof_id)
        return res


def make_backend(kind, objective, vars, logger=None, cfg: BackendConfig | None = None):
    cfg = cfg or BackendConfig(kind=kind)
    if kind == SIS:
        return SisBackend(objective, vars, logger, reified=False)
    if kind == SIS_REIFIED:
        return SisBackend(objective, vars, logger, reified=True)
    if kind == CG:
        return CgBackend(objective, vars, logger, cfg.stratification, cfg.hardening)
    if kind == CB:
        return CgBackend(objective, vars, logger, cfg.stratification, cfg.hardening, budget=cfg.cb_budget)
    raise ValueError(f"unknown backend {kind!r}")


def minimize_sis(cores, objective, ub, vars, logger=None, require_opt=True, reified=False, incumbent=None):
    b = SisBackend(objective, vars, logger, reified=reified)
    for c in cores:
        b.add_core(c)
    return b.minimize(ub, require_opt, incumbent)


def minimize_cg(cores, objective, ub, vars, logger=None, require_opt=True, incumbent=None, **kw):
    b = CgBackend(objective, vars, logger, **kw)
    for c in cores:
        b.add_core(c)
    return b.minimize(ub, require_opt, incumbent)


def minimize_cb(cores, objective, ub, vars, logger=None, require_opt=True, incumbent=None, budget=100, **kw):
    return minimize_cg(cores, objective, ub, vars, logger, require_opt, incumbent, budget=budget, **kw)


def optimal_sol_heuristic(last_new_cores, stagnant_iterations, limit=1000) -> bool:
    """Ask for an optimal hitting set when the last extraction found no core
    or the lower bound has not moved for ``limit`` iterations."""
    return last_new_cores == 0 or stagnant_iterations >= limit


class HittingSetSolver:
    """Dispatches hitting-set calls to SLS, the certified backend and the inexact one."""

    def __init__(self, objective, vars, cfg: BackendConfig, logger=None, sls_state: SlsState | None = None,
                 deadline=None, on_sls=None):
        self.objective = objective
        self.cfg = cfg
        self.vars = vars
        self.logger = logger if logger is not None else NullLogger(vars)
        self.exact = make_backend(cfg.kind, objective, vars, self.logger, cfg)
        self.inexact = None
        if cfg.hybrid != NONE:
            self.inexact = SisBackend(objective, vars, NullLogger(vars), reified=True,
                                      conflict_budget=cfg.inexact_conflicts)
            self.inexact.certified = False
        self.sls = sls_state if sls_state is not None else (SlsState(objective) if cfg.use_sls else None)
        self.cores = []
        self.discrepancies = []
        self.calls = {"sls": 0, "exact": 0, "inexact": 0}
        self.opt_calls = 0
        self.on_sls = on_sls
        for b in (self.exact, self.inexact):
            if b is not None:
                b.deadline = deadline

    def add_cores(self, cores):
        for c in cores:
            c = getattr(c, "constraint", c)
            self.cores.append(c)
            self.exact.add_core(c)
            if self.inexact is not None:
                self.inexact.add_core(c)

    def _exact(self, ub, opt, incumbent):
        self.calls["exact"] += 1
        before = self.exact.effort
        res = self.exact.minimize(ub, opt, incumbent)
        if self.sls is not None:
            self.sls.record_optimizer(self.exact.effort - before)
        return res

    def confirm(self, ub, incumbent):
        """Certified optimal hitting-set call, used to back an uncertified bound."""
        self.opt_calls += 1
        return self._exact(ub, True, incumbent)

    def solve_hs(self, lb, ub, opt, incumbent=None) -> HsResult:
        if not opt and self.sls is not None and use_sls(self.sls):
            self.calls["sls"] += 1
            gamma = sls_search(self.cores, self.objective, ub, self.sls)
            if gamma is not None:
                gamma = _project(gamma, sorted(self.objective.vars))
                c = cost(self.objective, gamma)
                if self.on_sls is not None:
                    self.on_sls(gamma, c, list(self.cores))
                if c < ub:
                    return HsResult(gamma, IMPROVED, lb, c)
        if opt:
            self.opt_calls += 1
        hybrid = self.cfg.hybrid
        if hybrid == NONE or (hybrid == FORCE_LB and opt):
            return self._finish(self._exact(ub, opt, incumbent), lb)
        self.calls["inexact"] += 1
        res = self.inexact.minimize(ub, opt, incumbent)
        if res is None:
            return self._finish(self._exact(ub, opt, incumbent), lb)
        if res.status == OPTIMAL:
            if hybrid == FORCE_LB:
                # inexact answers never move the lower bound in this mode
                return HsResult(res.solution, IMPROVED, lb, res.cost)
            refine = res.lower_bound_out > lb if hybrid == ALL_LB else res.lower_bound_out >= ub
            if refine:
                cert = self._exact(ub, True, incumbent)
                if cert.lower_bound_out != res.lower_bound_out:
                    log.warning("inexact bound %s disagrees with certified bound %s",
                                res.lower_bound_out, cert.lower_bound_out)
                    self.discrepancies.append((res.lower_bound_out, cert.lower_bound_out))
                return self._finish(cert, lb)
            res.certified = False
        return self._finish(res, lb)

    @staticmethod
    def _finish(res, lb):
        if res.status == IMPROVED or res.lower_bound_out is None:
            res.lower_bound_out = lb
        return res


def export_core_set(cores, objective, path):
    """Debug hook: write (K, O) as OPB for cross-checking with other solvers."""
    from .core import Instance
    from .opb import write_opb

    inst = Instance([getattr(c, "constraint", c) for c in cores], objective)
    with open(path, "w") as fh:
        fh.write(write_opb(inst))
