import io
import random

import pytest

from pbihs.certify import ProofLogger, VarManager
from pbihs.core import (
    Instance, Objective, brute_force_optimum, brute_force_solutions, clause, cost, evaluate,
)
from pbihs.gen import random_instance
from pbihs.hs import (
    ALL_LB, CB, CG, FORCE_LB, IMPROVED, OPT_LB, OPTIMAL, SIS, SIS_REIFIED, BackendConfig, CgBackend,
    HittingSetSolver, HsResult, make_backend, minimize_cb, minimize_cg, minimize_sis, optimal_sol_heuristic,
)

X, Y, Z = 1, 2, 3


def unit(*lits):
    return Objective.from_raw([(1, l) for l in lits])


def core_set(rng, max_vars=12, max_cons=15):
    """Random (K, O, incumbent, ub): constraints over objective variables only."""
    while True:
        inst = random_instance(rng, max_vars=max_vars, max_cons=max_cons)
        n = inst.nvars
        obj = Objective.from_raw(
            [(rng.randint(1, 10), rng.choice([-1, 1]) * v) for v in range(1, n + 1)], rng.randint(-3, 3))
        sols = brute_force_solutions(inst.constraints, range(1, n + 1))
        if sols:
            break
    vs = list(range(1, n + 1))
    worst = max((dict(zip(vs, s)) for s in sols), key=lambda a: cost(obj, a))
    return inst.constraints, obj, worst, cost(obj, worst), n


def check_optimal(res, cores, obj, ub):
    opt, _ = brute_force_optimum(cores, obj)
    assert res.status == OPTIMAL
    assert res.cost == cost(obj, res.solution) == res.lower_bound_out == opt
    assert all(evaluate(c, res.solution) for c in cores)


# -- examples -------------------------------------------------------------------

def test_solve_hs_empty_core_set():
    obj = unit(X, Y)
    hs = HittingSetSolver(obj, VarManager(2), BackendConfig(kind=SIS))
    res = hs.solve_hs(obj.constant, 2, opt=True)
    assert res.status == OPTIMAL and res.solution == {X: 0, Y: 0} and res.lower_bound_out == 0


def test_solve_hs_weighted_pair():
    obj = Objective.from_raw([(2, X), (3, Y)])
    for kind in (SIS, SIS_REIFIED, CG, CB):
        hs = HittingSetSolver(obj, VarManager(2), BackendConfig(kind=kind))
        hs.add_cores([clause([X, Y])])
        res = hs.solve_hs(0, 5, opt=True)
        assert res.solution == {X: 1, Y: 0} and res.lower_bound_out == 2, kind


def test_solve_hs_sls_short_circuits():
    obj = unit(X, Y)
    hs = HittingSetSolver(obj, VarManager(2), BackendConfig(kind=CG, use_sls=True))
    hs.add_cores([clause([X, Y])])
    res = hs.solve_hs(0, 2, opt=False)
    assert res.status == IMPROVED and res.cost == 1 and res.lower_bound_out == 0
    assert hs.calls == {"sls": 1, "exact": 0, "inexact": 0}


def test_sis_example_optimal():
    res = minimize_sis([clause([X, Y])], unit(X, Y), 2, VarManager(2))
    assert res.status == OPTIMAL and res.cost == 1 and res.lower_bound_out == 1


def test_sis_example_first_improvement():
    res = minimize_sis([clause([X, Y])], unit(X, Y), 2, VarManager(2), require_opt=False)
    assert res.status == IMPROVED and res.cost == 1


@pytest.mark.parametrize("reified", [False, True])
def test_sis_unsat_at_ub_returns_incumbent(reified):
    inc = {X: 0, Y: 1}
    res = minimize_sis([clause([X, Y])], unit(X, Y), 1, VarManager(2), reified=reified, incumbent=inc)
    assert res.status == OPTIMAL and res.lower_bound_out == 1 and res.solution == inc


def test_sis_unsat_at_ub_without_incumbent():
    res = minimize_sis([clause([X, Y])], unit(X, Y), 1, VarManager(2))
    assert res.lower_bound_out == 1 and res.cost == 1


def test_cg_single_core_trace():
    b = CgBackend(unit(X, Y), VarManager(2))
    b.add_core(clause([X, Y]))
    res = b.minimize(2)
    assert res.status == OPTIMAL and res.cost == 1
    assert b.ref.inc == 1 and b.ref.count == 1
    (o,) = [l for l in b.ref.weights]
    assert o > 2 and b.ref.weights[o] == 1


def test_cg_two_cores():
    res = minimize_cg([clause([X, Y]), clause([X, Z])], unit(X, Y, Z), 3, VarManager(3))
    assert res.status == OPTIMAL and res.cost == 1 and res.solution[X] == 1


def test_cg_stratification_order():
    b = CgBackend(Objective.from_raw([(5, X), (1, Y)]), VarManager(2))
    b.add_core(clause([X, Y]))
    seen = []
    orig = b.solver.solve

    def spy(assumptions=(), **kw):
        seen.append(sorted(assumptions))
        return orig(assumptions, **kw)

    b.solver.solve = spy
    res = b.minimize(6)
    assert seen[0] == [-X]
    assert res.cost == 1 and res.solution == {X: 0, Y: 1}


def test_cb_budget_one():
    b = make_backend(CB, unit(X, Y, Z), VarManager(3), cfg=BackendConfig(kind=CB, cb_budget=1))
    for c in (clause([X, Y]), clause([X, Z])):
        b.add_core(c)
    res = b.minimize(3)
    assert b.ref.count == 1
    assert res.status == OPTIMAL and res.cost == 1


def test_backend_config_rejects_sls_only():
    with pytest.raises(ValueError):
        BackendConfig(kind="sls-only")
    with pytest.raises(ValueError):
        BackendConfig(hybrid="sometimes")


def test_optimal_sol_heuristic():
    assert optimal_sol_heuristic(0, 3)
    assert optimal_sol_heuristic(4, 1000)
    assert not optimal_sol_heuristic(4, 3)
    assert not optimal_sol_heuristic(None, 0)


# -- properties -----------------------------------------------------------------

def test_backend_agreement_500():
    rng = random.Random(11)
    for _ in range(500):
        cores, obj, inc, ub, n = core_set(rng)
        for kind in (SIS, SIS_REIFIED, CG, CB):
            b = make_backend(kind, obj, VarManager(n), cfg=BackendConfig(kind=kind, cb_budget=2))
            for c in cores:
                b.add_core(c)
            check_optimal(b.minimize(ub, True, inc), cores, obj, ub)


def test_cb_budget_zero_matches_sis():
    rng = random.Random(12)
    for _ in range(200):
        cores, obj, inc, ub, n = core_set(rng)
        a = minimize_sis(cores, obj, ub, VarManager(n), reified=True, incumbent=inc)
        b = minimize_cb(cores, obj, ub, VarManager(n), incumbent=inc, budget=0)
        assert (a.solution, a.status, a.lower_bound_out, a.cost) == (b.solution, b.status, b.lower_bound_out, b.cost)


def test_improved_is_strictly_better():
    rng = random.Random(13)
    for _ in range(200):
        cores, obj, inc, ub, n = core_set(rng)
        for kind in (SIS, SIS_REIFIED, CG, CB):
            b = make_backend(kind, obj, VarManager(n), cfg=BackendConfig(kind=kind, cb_budget=1))
            for c in cores:
                b.add_core(c)
            res = b.minimize(ub, False, inc)
            assert all(evaluate(c, res.solution) for c in cores)
            if res.status == IMPROVED:
                assert res.cost < ub
            else:
                check_optimal(res, cores, obj, ub)


def test_reformulation_invariant():
    rng = random.Random(14)
    checked = 0
    for _ in range(150):
        cores, obj, inc, ub, n = core_set(rng, max_vars=7, max_cons=8)
        target, _ = brute_force_optimum(cores, obj)
        b = CgBackend(obj, VarManager(n), stratification=rng.random() < 0.5)

        def monitor(backend):
            nonlocal checked
            got, _ = brute_force_optimum(cores + backend.definitions, backend.reformulated())
            assert got == target
            checked += 1

        b.on_reformulate = monitor
        for c in cores:
            b.add_core(c)
        b.minimize(ub, True, inc)
    assert checked > 100


def test_hardening_only_excludes_expensive_literals():
    rng = random.Random(15)
    hardened = 0
    for _ in range(150):
        cores, obj, inc, ub, n = core_set(rng, max_vars=7, max_cons=8)
        b = CgBackend(obj, VarManager(n))
        for c in cores:
            b.add_core(c)
        orig = b.solver.solve

        def spy(assumptions=(), **kw):
            nonlocal hardened
            slack = ub - b.lower_bound
            for a in assumptions:
                l = -a
                if b.ref.weights[l] >= slack:
                    # any solution with l true costs at least ub
                    best, _ = brute_force_optimum(cores + b.definitions + [clause([l])], b.reformulated())
                    assert best is None or best >= ub
                    hardened += 1
            return orig(assumptions, **kw)

        b.solver.solve = spy
        check_optimal(b.minimize(ub, True, inc), cores, obj, ub)
    assert hardened > 0


def test_incremental_cores_across_calls():
    rng = random.Random(16)
    for _ in range(100):
        cores, obj, inc, ub, n = core_set(rng)
        for kind in (SIS_REIFIED, CG, CB):
            b = make_backend(kind, obj, VarManager(n), cfg=BackendConfig(kind=kind, cb_budget=1))
            for i, c in enumerate(cores):
                b.add_core(c)
                check_optimal(b.minimize(ub, True, inc), cores[: i + 1], obj, ub)


# -- hybrids --------------------------------------------------------------------

def hybrid_solver(hybrid, obj, n, kind=CG, log=False):
    vars = VarManager(n)
    logger = ProofLogger(io.StringIO(), Instance([], obj, n), vars) if log else None
    return HittingSetSolver(obj, vars, BackendConfig(kind=kind, hybrid=hybrid), logger)


def test_force_lb_non_optimal_call_stays_uncertified():
    obj = unit(X, Y)
    hs = hybrid_solver(FORCE_LB, obj, 2, log=True)
    hs.add_cores([clause([X, Y])])
    before = hs.logger.stream.getvalue()
    res = hs.solve_hs(0, 2, opt=False)
    assert hs.calls["exact"] == 0 and hs.calls["inexact"] == 1
    assert res.lower_bound_out == 0 and res.cost == 1
    assert hs.logger.stream.getvalue() == before


def test_force_lb_optimal_call_goes_to_certified():
    obj = unit(X, Y)
    hs = hybrid_solver(FORCE_LB, obj, 2)
    hs.add_cores([clause([X, Y])])
    res = hs.solve_hs(0, 2, opt=True)
    assert hs.calls["exact"] == 1 and hs.calls["inexact"] == 0
    assert res.certified and res.lower_bound_out == 1


def test_opt_lb_reruns_only_when_bounds_meet():
    obj = unit(X, Y)
    hs = hybrid_solver(OPT_LB, obj, 2)
    hs.add_cores([clause([X, Y])])
    res = hs.solve_hs(0, 3, opt=True)
    # inexact optimum 1 < ub 3: accepted without a certified rerun
    assert hs.calls["exact"] == 0 and res.lower_bound_out == 1 and not res.certified
    res = hs.solve_hs(1, 1, opt=True, incumbent={X: 1, Y: 0})
    assert hs.calls["exact"] == 1 and res.certified and res.lower_bound_out == 1


def test_all_lb_reruns_on_every_refinement():
    obj = unit(X, Y)
    hs = hybrid_solver(ALL_LB, obj, 2)
    hs.add_cores([clause([X, Y])])
    res = hs.solve_hs(0, 3, opt=True)
    assert hs.calls["exact"] == 1 and res.certified and res.lower_bound_out == 1
    res = hs.solve_hs(1, 3, opt=True)
    # no refinement: the inexact answer is used as is
    assert hs.calls["exact"] == 1 and res.lower_bound_out == 1


def test_discrepancy_is_logged_and_certified_wins():
    obj = unit(X, Y)
    hs = hybrid_solver(ALL_LB, obj, 2)
    hs.add_cores([clause([X, Y])])
    hs.inexact.minimize = lambda ub, opt, inc: HsResult({X: 1, Y: 1}, OPTIMAL, 2, 2)
    res = hs.solve_hs(0, 3, opt=True)
    assert res.lower_bound_out == 1 and res.certified
    assert hs.discrepancies == [(2, 1)]


def test_hybrid_lb_updates_are_sound():
    rng = random.Random(17)
    for _ in range(100):
        cores, obj, inc, ub, n = core_set(rng)
        opt, _ = brute_force_optimum(cores, obj)
        for hybrid in (OPT_LB, ALL_LB, FORCE_LB):
            hs = hybrid_solver(hybrid, obj, n, kind=rng.choice([SIS, CG, CB]))
            hs.add_cores(cores)
            for flag in (False, True):
                res = hs.solve_hs(obj.constant, ub, flag, incumbent=inc)
                assert res.lower_bound_out <= opt
                assert all(evaluate(c, res.solution) for c in cores)
                if hybrid == FORCE_LB and res.lower_bound_out > obj.constant:
                    assert res.certified
