import io
import random

import pytest

from pbihs.certify import (
    EQUIV, IMPLIED_BY, IMPLIES, ProofLogger, VarManager, _Database, _eval_pol, _resolve_ids, check,
    reify_constraints,
)
from pbihs.core import (
    Instance, Objective, brute_force_optimum, brute_force_solutions, clause, make_constraint,
)
from pbihs.gen import knapsack_conflicts, vertex_cover
from pbihs.hs import BackendConfig
from pbihs.ihs import RunConfig, ihs_solve

from conftest import rng_instances
from mutations import MUTATIONS, apply

X, Y = 1, 2


def pair_instance():
    return Instance([clause([X, Y])], Objective.from_raw([(1, X), (1, Y)]), 2)


def proof(*steps, f=1):
    return "\n".join(["ihsproof 1", f"f {f}", *steps])


def same_solutions(a, b, variables):
    return brute_force_solutions([a], variables) == brute_force_solutions([b], variables)


# -- variables ------------------------------------------------------------------

def test_fresh_variables_are_sequential():
    vm = VarManager(5)
    assert vm.register_fresh_var() == 6
    assert vm.register_fresh_var("a") == 7


def test_fresh_after_reify():
    inst = Instance([], Objective.from_raw([(1, X)]), 5)
    log = ProofLogger(io.StringIO(), inst)
    x = log.register_fresh_var()
    log.reify(x, IMPLIES, clause([X]))
    assert x == 6 and log.register_fresh_var() == 7


# -- logging --------------------------------------------------------------------

def test_sic_pair_bound_two():
    log = ProofLogger(io.StringIO(), pair_instance())
    sic = log.log_reified_sic(Objective.from_raw([(1, X), (1, Y)]), 2)
    expected = make_constraint([(1, -X), (1, -Y)], 1)
    assert sic.constraint == expected
    (fwd,) = reify_constraints(sic.var, IMPLIES, expected)
    assert same_solutions(fwd, make_constraint([(1, -sic.var), (1, -X), (1, -Y)], 1), [X, Y, sic.var])


def test_sic_single_weight_three():
    log = ProofLogger(io.StringIO(), pair_instance())
    sic = log.log_reified_sic(Objective.from_raw([(3, X)]), 3)
    assert same_solutions(sic.constraint, clause([-X]), [X])


def test_sic_below_constant_is_contradiction():
    log = ProofLogger(io.StringIO(), pair_instance())
    sic = log.log_reified_sic(Objective.from_raw([(1, X)], 2), 2)
    assert sic.constraint.is_contradiction()


def test_seeded_core_aliases_input_id():
    buf = io.StringIO()
    log = ProofLogger(buf, pair_instance())
    assert log.log_core(clause([X, Y]), 1) == 2
    assert buf.getvalue().splitlines()[-1] == "pol 1 1 * ;"


def test_reify_forms():
    c = make_constraint([(2, X), (1, Y)], 2)
    r = 3
    fwd, rev = reify_constraints(r, EQUIV, c)
    assert fwd == make_constraint([(2, -r), (2, X), (1, Y)], 2)
    assert rev == make_constraint([(2, r), (2, -X), (1, -Y)], 2)
    assert reify_constraints(r, IMPLIED_BY, c) == [rev]


# -- the checker: examples ------------------------------------------------------

HAND = ["soli 1 x1 ~x2 ;", "pol 1 2 + ;", "conclude OPT 1"]


def test_hand_proof_accepted():
    res = check(pair_instance(), proof(*HAND))
    assert res.accepted and res.cost == 1


def test_hand_proof_wrong_cost_rejected():
    res = check(pair_instance(), proof("soli 0 x1 ~x2 ;", *HAND[1:]))
    assert not res.accepted and res.step == 1 and "cost" in res.reason


def test_reify_on_instance_variable_rejected():
    res = check(pair_instance(), proof("reify x1 => +1 x2 >= 1 ;", *HAND))
    assert not res.accepted and res.step == 1 and "fresh" in res.reason


def test_reify_twice_rejected():
    res = check(pair_instance(), proof("reify x3 => +1 x2 >= 1 ;", "reify x3 <= +1 x1 >= 1 ;"))
    assert not res.accepted and res.step == 2


def test_unsat_proof():
    inst = Instance([clause([X]), clause([-X])], Objective.from_raw([(1, X)]), 1)
    assert check(inst, proof("rup >= 1 ;", "conclude UNSAT", f=2)).accepted
    assert not check(inst, proof("conclude UNSAT", f=2)).accepted


def test_missing_conclusion_and_header():
    assert not check(pair_instance(), proof(*HAND[:2]))
    assert not check(pair_instance(), "f 1\nconclude OPT 1")


def test_rup_not_implied_rejected():
    res = check(pair_instance(), proof("rup +1 x1 >= 1 ;"))
    assert not res.accepted and res.reason == "RUP check failed"


def test_rup_implied_accepted():
    inst = Instance([clause([X, Y]), clause([-Y])], Objective.from_raw([(1, X)]), 2)
    assert check(inst, proof("rup +1 x1 >= 1 ;", "soli 1 x1 ~x2 ;", "pol 3 4 + ;", "conclude OPT 1", f=2))


def test_solution_violating_input_rejected():
    res = check(pair_instance(), proof("soli 0 ~x1 ~x2 ;"))
    assert not res.accepted and "violates" in res.reason


def test_conclusion_must_match_best_solution():
    res = check(pair_instance(), proof("soli 2 x1 x2 ;", "soli 1 x1 ~x2 ;", "pol 1 3 + ;", "conclude OPT 2"))
    assert not res.accepted


# -- cutting planes rules -------------------------------------------------------

def derive(constraints, expr):
    """Evaluate one postfix expression over ``constraints`` (ids 1..n)."""
    db = _Database()
    for c in constraints:
        db.add(c)
    return _eval_pol(_resolve_ids(expr, db, len(constraints)))


def test_division_rounds_up():
    c = make_constraint([(3, 1), (2, 2), (1, 3)], 4)
    assert derive([c], [1, 2, "d"]) == make_constraint([(2, 1), (1, 2), (1, 3)], 2)


def test_saturation_caps_coefficients():
    c = make_constraint([(5, 1), (1, 2)], 2)
    assert derive([c], [1, "s"]) == make_constraint([(2, 1), (1, 2)], 2)


def test_multiplication_and_addition_cancel():
    a = make_constraint([(1, 1), (1, 2)], 1)
    b = make_constraint([(1, -1), (1, 3)], 1)
    # x1 + x2 + 2*(~x1 + x3) >= 3  ->  x2 + ~x1 + 2 x3 >= 2
    assert derive([a, b], [1, 2, 2, "*", "+"]) == make_constraint([(1, 2), (1, -1), (2, 3)], 2)


def test_literal_axiom():
    a = make_constraint([(1, -1), (1, 2)], 1)
    assert derive([a], [1, "x1", "+"]) == make_constraint([(1, 2)], 0)


@pytest.mark.parametrize("expr, reason", [
    ("pol 1 0 * ;", "positive"),
    ("pol 1 -2 d ;", "positive"),
    ("pol 1 + ;", "two constraints"),
    ("pol 1 2 ;", "one constraint"),
    ("pol 5 ;", "unknown"),
    ("pol 1 foo + ;", "bad token"),
])
def test_malformed_pol_rejected(expr, reason):
    res = check(pair_instance(), proof("soli 1 x1 ~x2 ;", expr))
    assert not res.accepted and res.step == 2 and reason in res.reason


# -- end to end -----------------------------------------------------------------

def solve_with_proof(inst, **kw):
    buf = io.StringIO()
    res = ihs_solve(inst, RunConfig(backend=BackendConfig(**kw)), buf)
    return res, buf.getvalue()


def test_soundness_on_random_instances():
    for inst in rng_instances(31, 120, max_vars=12):
        opt, _ = brute_force_optimum(inst.constraints, inst.objective)
        for kind in ("sis", "sis-reified", "cg", "cb"):
            res, text = solve_with_proof(inst, kind=kind, cb_budget=1)
            verdict = check(inst, text)
            assert verdict.accepted, (kind, verdict)
            assert verdict.cost == opt == res.cost


REFERENCE = [
    lambda: knapsack_conflicts(random.Random(4), 10),
    lambda: vertex_cover(random.Random(7), 12, p=0.3),
]


@pytest.mark.parametrize("make", REFERENCE, ids=["knapsack", "cover"])
@pytest.mark.parametrize("kind", ["sis", "sis-reified", "cg", "cb"])
def test_mutation_suite_rejected(make, kind):
    inst = make()
    _, text = solve_with_proof(inst, kind=kind, cb_budget=1)
    lines = text.splitlines()
    assert check(inst, text).accepted
    assert len(MUTATIONS) == 20
    for m in MUTATIONS:
        out = apply(m, lines)
        assert out is not None, m.__name__
        assert not check(inst, "\n".join(out)).accepted, m.__name__


def test_trivial_rup_is_accepted():
    assert check(pair_instance(), proof("rup >= 0 ;", "soli 1 x1 ~x2 ;", "pol 1 3 + ;", "conclude OPT 1"))
