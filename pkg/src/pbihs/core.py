"""Pseudo-Boolean constraints, objectives and assignments.

Literals are nonzero ints: ``v`` is variable ``v`` and ``-v`` its negation.
All arithmetic uses Python ints, so coefficients never overflow.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

GE, LE, EQ = ">=", "<=", "="

Assignment = dict  # var -> 0/1

BRUTE_FORCE_LIMIT = 24


class ContractError(ValueError):
    """Raised when an operation's precondition is violated."""


def var(lit: int) -> int:
    return lit if lit > 0 else -lit


def lit_value(lit: int, alpha: Mapping[int, int]) -> int:
    try:
        v = alpha[var(lit)]
    except KeyError:
        raise ContractError(f"variable x{var(lit)} is unassigned") from None
    return v if lit > 0 else 1 - v


def lit_str(lit: int) -> str:
    return f"x{lit}" if lit > 0 else f"~x{-lit}"


@dataclass(frozen=True)
class PbConstraint:
    """Normalized constraint ``sum(coef * lit) >= degree``.

    ``terms`` is a tuple of ``(coef, lit)`` pairs with positive coefficients
    over distinct variables, sorted by variable.
    """

    terms: tuple
    degree: int
    id: int | None = field(default=None, compare=False)

    def __post_init__(self):
        seen = set()
        for a, l in self.terms:
            if a <= 0:
                raise ContractError("coefficients must be positive")
            if var(l) in seen:
                raise ContractError(f"variable x{var(l)} occurs twice")
            seen.add(var(l))
        if self.degree < 0:
            raise ContractError("degree must be non-negative")

    @property
    def lits(self):
        return [l for _, l in self.terms]

    @property
    def vars(self):
        return {var(l) for _, l in self.terms}

    def coef_sum(self) -> int:
        return sum(a for a, _ in self.terms)

    def is_trivial(self) -> bool:
        return self.degree == 0

    def is_contradiction(self) -> bool:
        return self.coef_sum() < self.degree

    def slack(self, alpha: Mapping[int, int]) -> int:
        return sum(a * lit_value(l, alpha) for a, l in self.terms) - self.degree

    def with_id(self, cid: int) -> "PbConstraint":
        return PbConstraint(self.terms, self.degree, cid)

    def __str__(self):
        lhs = " ".join(f"+{a} {lit_str(l)}" for a, l in self.terms)
        return f"{lhs} >= {self.degree}".strip()


def clause(lits: Iterable[int]) -> PbConstraint:
    """At-least-one constraint ``sum(lits) >= 1``."""
    return make_constraint([(1, l) for l in lits], 1)


def make_constraint(terms, degree: int) -> PbConstraint:
    """Normalize ``sum(coef * lit) >= degree`` for arbitrary integer coefficients."""
    merged: dict[int, int] = {}
    const = 0
    for a, l in terms:
        if a == 0:
            continue
        # a * ~x == a - a * x
        if l < 0:
            const += a
            a, l = -a, -l
        merged[l] = merged.get(l, 0) + a
    degree -= const
    out = []
    for v in sorted(merged):
        a = merged[v]
        if a > 0:
            out.append((a, v))
        elif a < 0:
            # a * x == a - a * ~x, move the constant to the right-hand side
            degree -= a
            out.append((-a, -v))
    return PbConstraint(tuple(out), max(degree, 0))


def normalize(raw_terms, relation: str, rhs: int) -> list[PbConstraint]:
    """Turn ``sum(coef * lit) <rel> rhs`` into one or two normalized constraints."""
    raw_terms = list(raw_terms)
    if relation == GE:
        return [make_constraint(raw_terms, rhs)]
    if relation == LE:
        return [make_constraint([(-a, l) for a, l in raw_terms], -rhs)]
    if relation == EQ:
        return normalize(raw_terms, GE, rhs) + normalize(raw_terms, LE, rhs)
    raise ContractError(f"unknown relation {relation!r}")


def negate(c: PbConstraint) -> PbConstraint:
    """Constraint equivalent to ``not c``: ``sum(coef * ~lit) >= sum(coef) - degree + 1``."""
    return make_constraint([(a, -l) for a, l in c.terms], c.coef_sum() - c.degree + 1)


def evaluate(c: PbConstraint, alpha: Mapping[int, int]) -> bool:
    return c.slack(alpha) >= 0


@dataclass(frozen=True)
class Objective:
    """``sum(weight * lit) + constant`` with positive weights over distinct variables."""

    terms: tuple = ()
    constant: int = 0

    @classmethod
    def from_raw(cls, raw_terms, constant: int = 0) -> "Objective":
        merged: dict[int, int] = {}
        for w, l in raw_terms:
            if l < 0:
                constant += w
                w, l = -w, -l
            merged[l] = merged.get(l, 0) + w
        terms = []
        for v in sorted(merged):
            w = merged[v]
            if w > 0:
                terms.append((w, v))
            elif w < 0:
                constant += w
                terms.append((-w, -v))
        return cls(tuple(terms), constant)

    @property
    def lits(self):
        return [l for _, l in self.terms]

    @property
    def vars(self):
        return {var(l) for _, l in self.terms}

    def weight_sum(self) -> int:
        return sum(w for w, _ in self.terms)

    def __str__(self):
        s = " ".join(f"+{w} {lit_str(l)}" for w, l in self.terms)
        if self.constant:
            s += f" {self.constant:+d}"
        return s


def cost(obj: Objective, alpha: Mapping[int, int]) -> int:
    return sum(w * lit_value(l, alpha) for w, l in obj.terms) + obj.constant


def at_most(obj: Objective, bound: int) -> PbConstraint:
    """Normalized form of ``obj <= bound``."""
    return make_constraint([(-w, l) for w, l in obj.terms], obj.constant - bound)


def at_least(obj: Objective, bound: int) -> PbConstraint:
    """Normalized form of ``obj >= bound``."""
    return make_constraint(list(obj.terms), bound - obj.constant)


@dataclass
class Instance:
    constraints: list
    objective: Objective = field(default_factory=Objective)
    nvars: int = 0

    def __post_init__(self):
        top = max([0] + [max(c.vars, default=0) for c in self.constraints]
                  + [max(self.objective.vars, default=0)])
        if self.nvars < top:
            if self.nvars:
                raise ContractError(f"variable x{top} exceeds variable count {self.nvars}")
            self.nvars = top

    def is_solution(self, alpha) -> bool:
        return all(evaluate(c, alpha) for c in self.constraints)


# --- brute force (test oracles) -------------------------------------------

def _all_assignments(nv: int) -> np.ndarray:
    return ((np.arange(1 << nv)[:, None] >> np.arange(nv)[None, :]) & 1).astype(np.int64)


def _lhs(table, index, terms):
    total = np.zeros(table.shape[0], dtype=object if _big(terms) else np.int64)
    for a, l in terms:
        col = table[:, index[var(l)]]
        total = total + a * (col if l > 0 else 1 - col)
    return total


def _big(terms) -> bool:
    return sum(abs(a) for a, _ in terms) >= 1 << 60


def _solution_mask(constraints, table, index):
    mask = np.ones(table.shape[0], dtype=bool)
    for c in constraints:
        mask &= _lhs(table, index, c.terms) >= c.degree
    return mask


def _enumerate(constraints, extra_vars=()):
    vs = sorted(set().union(*[c.vars for c in constraints], set(extra_vars)))
    if len(vs) > BRUTE_FORCE_LIMIT:
        raise ContractError(f"{len(vs)} variables exceed the brute-force limit {BRUTE_FORCE_LIMIT}")
    return vs, _all_assignments(len(vs)), {v: i for i, v in enumerate(vs)}


def entailed_by_bruteforce(formula, c: PbConstraint) -> bool:
    """True iff every solution of ``formula`` satisfies ``c`` (enumeration)."""
    formula = list(formula)
    vs, table, index = _enumerate(formula, c.vars)
    mask = _solution_mask(formula, table, index)
    return bool(np.all(_lhs(table, index, c.terms)[mask] >= c.degree))


def brute_force_optimum(constraints, obj: Objective):
    """Return ``(optimal cost, assignment)`` or ``(None, None)`` when infeasible."""
    constraints = list(constraints)
    vs, table, index = _enumerate(constraints, obj.vars)
    mask = _solution_mask(constraints, table, index)
    if not mask.any():
        return None, None
    costs = _lhs(table, index, obj.terms) + obj.constant
    costs = np.where(mask, costs, costs.max() + 1)
    row = int(np.argmin(costs))
    return int(costs[row]), {v: int(table[row, i]) for i, v in enumerate(vs)}


def brute_force_solutions(constraints, variables) -> set:
    """Set of solutions projected onto ``variables`` as bit tuples."""
    constraints = list(constraints)
    vs, table, index = _enumerate(constraints, variables)
    mask = _solution_mask(constraints, table, index)
    cols = [index[v] for v in sorted(variables)]
    return {tuple(row) for row in table[mask][:, cols].tolist()}


def iter_assignments(variables):
    variables = sorted(variables)
    for bits in itertools.product((0, 1), repeat=len(variables)):
        yield dict(zip(variables, bits))
