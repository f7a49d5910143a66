"""Random and structured instance generators."""

from __future__ import annotations

import random

from .core import GE, LE, EQ, Instance, Objective, normalize


def random_instance(rng: random.Random, max_vars=12, max_cons=15, max_coef=10, planted=True) -> Instance:
    """Small random PBO instance.

    With ``planted`` the right-hand sides are chosen so that a hidden random
    assignment satisfies every constraint, so the instance is feasible.
    """
    n = rng.randint(1, max_vars)
    hidden = {v: rng.randint(0, 1) for v in range(1, n + 1)}
    cons = []
    for _ in range(rng.randint(1, max_cons)):
        vs = rng.sample(range(1, n + 1), rng.randint(1, min(n, 6)))
        terms = [(rng.choice([-1, 1]) * rng.randint(1, max_coef), v) for v in vs]
        rel = rng.choice([GE, GE, GE, LE, EQ])
        lhs = sum(a * hidden[v] for a, v in terms)
        if not planted:
            rhs = rng.randint(-max_coef, max_coef)
        elif rel == GE:
            rhs = lhs - rng.randint(0, max_coef)
        elif rel == LE:
            rhs = lhs + rng.randint(0, max_coef)
        else:
            rhs = lhs
        cons.extend(normalize(terms, rel, rhs))
    k = rng.randint(1, n)
    obj = Objective.from_raw(
        [(rng.randint(1, max_coef), rng.choice([-1, 1]) * v) for v in rng.sample(range(1, n + 1), k)],
        rng.randint(-3, 3),
    )
    return Instance(cons, obj, n)


def random_graph(rng: random.Random, n: int, p: float):
    return [(u, v) for u in range(1, n + 1) for v in range(u + 1, n + 1) if rng.random() < p]


def vertex_cover(rng: random.Random, n: int, p: float = 0.1, max_weight=20) -> Instance:
    """Weighted vertex cover: one clause per edge, minimize the cover weight."""
    edges = random_graph(rng, n, p)
    cons = [c for u, v in edges for c in normalize([(1, u), (1, v)], GE, 1)]
    obj = Objective.from_raw([(rng.randint(1, max_weight), v) for v in range(1, n + 1)])
    return Instance(cons, obj, n)


def knapsack_conflicts(rng: random.Random, n: int, p: float = 0.3, max_weight=30) -> Instance:
    """0-1 knapsack with pairwise conflicts, written as minimization of the lost value."""
    weights = [rng.randint(1, max_weight) for _ in range(n)]
    values = [rng.randint(1, max_weight) for _ in range(n)]
    cap = sum(weights) // 3
    cons = normalize([(w, i + 1) for i, w in enumerate(weights)], LE, cap)
    for u, v in random_graph(rng, n, p):
        cons += normalize([(1, u), (1, v)], LE, 1)
    obj = Objective.from_raw([(val, -(i + 1)) for i, val in enumerate(values)])
    return Instance(cons, obj, n)
