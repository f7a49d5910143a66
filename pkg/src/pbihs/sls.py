"""Incremental two-phase local search over the accumulated cores."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction

from .core import Objective, cost, var


@dataclass
class SlsConfig:
    rho: float = 0.3
    flip_multiplier: int = 10
    smooth_prob: float = 0.3
    seed: int = 0
    bms_threshold: int = 1000
    bms_sample: int = 50


class SlsState:
    """Search state carried between calls: cores, weights, last solution, effort statistics."""

    def __init__(self, objective: Objective, config: SlsConfig | None = None):
        self.config = config or SlsConfig()
        self.rng = random.Random(self.config.seed)
        self.objective = objective
        self.vars = sorted(objective.vars)
        self.obj_weight = {var(l): (w if l > 0 else -w) for w, l in objective.terms}
        # integer scale so that one unit of weighted infeasibility outweighs any cost change
        self.scale = objective.weight_sum() + 1
        self.cons = []      # (terms, degree)
        self.weights = []
        self.occ = {v: [] for v in self.vars}
        self.previous = {var(l): (0 if l > 0 else 1) for _, l in objective.terms}
        self.best = None
        self.best_cost = None
        self.sls_effort = []
        self.opt_effort = []
        self.effort = 0

    def add_constraint(self, c):
        ci = len(self.cons)
        self.cons.append((list(c.terms), c.degree))
        self.weights.append(1)
        for a, l in c.terms:
            self.occ.setdefault(var(l), []).append((ci, a, l))
            if var(l) not in self.previous:
                self.previous[var(l)] = 0
                self.vars.append(var(l))
                self.vars.sort()

    def sync(self, cores):
        for c in list(cores)[len(self.cons):]:
            self.add_constraint(getattr(c, "constraint", c))

    # -- timing policy -----------------------------------------------------

    def record_sls(self, effort):
        self.sls_effort.append(effort)

    def record_optimizer(self, effort):
        self.opt_effort.append(effort)


def use_sls(state: SlsState) -> bool:
    """Skip SLS once the optimizer is known to be no slower than SLS (>= 3 samples each)."""
    if len(state.sls_effort) < 3 or len(state.opt_effort) < 3:
        return True
    mean_opt = sum(state.opt_effort) / len(state.opt_effort)
    mean_sls = sum(state.sls_effort) / len(state.sls_effort)
    return mean_opt > mean_sls


class _Walk:
    """One local search run from a given start point."""

    def __init__(self, state: SlsState, start: dict):
        self.s = state
        self.alpha = dict(start)
        self.lhs = []
        for terms, _ in state.cons:
            self.lhs.append(sum(a for a, l in terms if self.value(l)))
        self.unsat = {ci for ci, (_, d) in enumerate(state.cons) if self.lhs[ci] < d}

    def value(self, l):
        v = self.alpha[var(l)]
        return v if l > 0 else 1 - v

    def score_int(self, v):
        s = self.s
        hard = 0
        for ci, a, l in s.occ.get(v, ()):
            d = s.cons[ci][1]
            before = max(0, d - self.lhs[ci])
            after = max(0, d - (self.lhs[ci] - a if self.value(l) else self.lhs[ci] + a))
            hard -= s.weights[ci] * (after - before)
        w = s.obj_weight.get(v, 0)
        delta_obj = w if self.alpha[v] == 0 else -w
        s.effort += len(s.occ.get(v, ())) + 1
        return hard * s.scale - delta_obj

    def flip(self, v):
        s = self.s
        for ci, a, l in s.occ.get(v, ()):
            self.lhs[ci] += -a if self.value(l) else a
            if self.lhs[ci] < s.cons[ci][1]:
                self.unsat.add(ci)
            else:
                self.unsat.discard(ci)
        self.alpha[v] = 1 - self.alpha[v]

    def pick(self, candidates):
        s = self.s
        if len(candidates) > s.config.bms_threshold:
            candidates = s.rng.sample(candidates, s.config.bms_sample)
        best, top = None, []
        for v in candidates:
            sc = self.score_int(v)
            if best is None or sc > best:
                best, top = sc, [v]
            elif sc == best:
                top.append(v)
        return best, (s.rng.choice(top) if top else None)

    def run(self, budget):
        s = self.s
        best = None
        for step in range(budget + 1):
            if not self.unsat:
                c = cost(s.objective, self.alpha)
                if best is None or c < best[0]:
                    best = (c, dict(self.alpha))
            if step == budget:
                break
            if not self.unsat:
                sc, v = self.pick(s.vars)
                if v is None or sc <= 0:
                    break
                self.flip(v)
                continue
            cand = sorted({var(l) for ci in self.unsat for _, l in s.cons[ci][0] if not self.value(l)})
            sc, v = self.pick(cand)
            if sc is not None and sc > 0:
                self.flip(v)
                continue
            for ci in self.unsat:
                s.weights[ci] += 1
            if s.rng.random() < s.config.smooth_prob:
                for ci in range(len(s.cons)):
                    if ci not in self.unsat and s.weights[ci] > 1:
                        s.weights[ci] -= 1
            ci = s.rng.choice(sorted(self.unsat))
            false_vars = [var(l) for _, l in s.cons[ci][0] if not self.value(l)]
            _, v = self.pick(false_vars)
            if v is None:
                break
            self.flip(v)
        return best


def score(v: int, state: SlsState, alpha: dict | None = None) -> Fraction:
    """Attractiveness of flipping ``v`` (under ``alpha``, default the last solution):
    weighted repair gain minus the cost change scaled by ``1 / (sum of weights + 1)``."""
    alpha = {**state.previous, **(alpha or {})}
    return Fraction(_Walk(state, alpha).score_int(v), state.scale)


def perturb(alpha: dict, variables, rho: float, rng: random.Random) -> dict:
    """Flip exactly ``ceil(rho * n)`` distinct variables chosen uniformly."""
    variables = sorted(variables)
    k = min(len(variables), math.ceil(rho * len(variables)))
    out = dict(alpha)
    for v in rng.sample(variables, k):
        out[v] = 1 - out[v]
    return out


def sls_search(cores, objective: Objective, ub, state: SlsState, flip_budget=None):
    """Two-phase search; returns a feasible assignment for the cores or None."""
    state.sync(cores)
    start_effort = state.effort
    if not state.cons:
        alpha = {var(l): (0 if l > 0 else 1) for _, l in objective.terms}
        state.previous = dict(alpha)
        return alpha
    n = len(state.vars)
    if flip_budget is None:
        flip_budget = state.config.flip_multiplier * n
    prev = {v: state.previous.get(v, 0) for v in state.vars}
    first = _Walk(state, prev).run(flip_budget)
    # the perturbation flips are charged to the second phase's budget
    k = min(n, math.ceil(state.config.rho * n))
    second = None
    if flip_budget >= k:
        second = _Walk(state, perturb(prev, state.vars, state.config.rho, state.rng)).run(flip_budget - k)
    found = [r for r in (first, second) if r is not None]
    state.record_sls(state.effort - start_effort)
    if not found:
        return None
    # the second phase wins ties
    c, alpha = min(reversed(found), key=lambda r: r[0])
    assert all(sum(a for a, l in t if (alpha[var(l)] if l > 0 else 1 - alpha[var(l)])) >= d
               for t, d in state.cons)
    state.previous = dict(alpha)
    if state.best_cost is None or c < state.best_cost:
        state.best, state.best_cost = dict(alpha), c
    return alpha

