"""Proof logging and proof checking for certified runs.

Proof files are line based::

    ihsproof 1
    f <number of input constraints>
    rup <constraint> ;
    pol <postfix expression> ;
    reify x<k> <=>|=>|<= <constraint> ;
    soli <cost> <literals> ;
    conclude OPT <cost>      |  conclude UNSAT

Constraint ids ``1..f`` are the input constraints in file order; every
``rup``, ``pol`` and ``soli`` line and each direction of a ``reify`` line
receives the next id.  ``soli`` adds the improving constraint
``objective <= cost - 1``.  ``pol`` expressions are postfix over ids,
literal axioms (``x3``/``~x3`` meaning ``lit >= 0``) and the operators
``+``, ``*`` (multiply by the preceding constant), ``d`` (divide by the
preceding constant, rounding up) and ``s`` (saturate).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import NamedTuple

from .core import (
    Instance, Objective, PbConstraint, at_most, cost as objective_cost, evaluate,
    lit_str, make_constraint, negate, var,
)

IMPLIES, IMPLIED_BY, EQUIV = "=>", "<=", "<=>"


# --- variables ---------------------------------------------------------------

class VarManager:
    """Single source of fresh variables for everything that runs in one solve."""

    def __init__(self, nvars: int):
        self.nvars = nvars
        self.names = {}

    def register_fresh_var(self, hint: str = "") -> int:
        self.nvars += 1
        if hint:
            self.names[self.nvars] = hint
        return self.nvars


# --- proof steps ---------------------------------------------------------------

@dataclass
class CuttingPlanes:
    tokens: list


@dataclass
class Rup:
    constraint: PbConstraint


@dataclass
class Reify:
    var: int
    direction: str
    constraint: PbConstraint


@dataclass
class LogSolution:
    assignment: dict
    cost: int


@dataclass
class Conclude:
    kind: str  # "OPT" or "UNSAT"
    cost: int | None = None


@dataclass
class ProofLog:
    num_inputs: int
    steps: list = field(default_factory=list)


def reify_constraints(x: int, direction: str, c: PbConstraint) -> list:
    """``x => c`` and/or ``x <= c`` in normalized form (``=>`` first)."""
    out = []
    if direction in (IMPLIES, EQUIV):
        out.append(make_constraint([(c.degree, -x)] + list(c.terms), c.degree))
    if direction in (IMPLIED_BY, EQUIV):
        k = c.coef_sum() - c.degree + 1
        out.append(make_constraint([(k, x)] + [(a, -l) for a, l in c.terms], k))
    return out


def format_step(step) -> str:
    if isinstance(step, Rup):
        return f"rup {step.constraint} ;"
    if isinstance(step, CuttingPlanes):
        return "pol " + " ".join(str(t) for t in step.tokens) + " ;"
    if isinstance(step, Reify):
        return f"reify x{step.var} {step.direction} {step.constraint} ;"
    if isinstance(step, LogSolution):
        lits = " ".join(lit_str(v if step.assignment[v] else -v) for v in sorted(step.assignment))
        return f"soli {step.cost} {lits} ;"
    if isinstance(step, Conclude):
        return f"conclude {step.kind}" + (f" {step.cost}" if step.cost is not None else "")
    raise TypeError(step)


# --- logging -------------------------------------------------------------------

class SicRecord(NamedTuple):
    var: int
    id: int
    reverse_id: int
    constraint: PbConstraint


class ProofLogger:
    """Streams proof steps to a text handle and mirrors the checker's id counter."""

    enabled = True

    def __init__(self, stream, instance: Instance, vars: VarManager | None = None):
        self.stream = stream
        self.objective = instance.objective
        self.vars = vars or VarManager(instance.nvars)
        self.next_id = len(instance.constraints) + 1
        self.steps = 0
        self.best_solution_id = None
        stream.write(f"ihsproof 1\nf {len(instance.constraints)}\n")

    def register_fresh_var(self, hint: str = "") -> int:
        return self.vars.register_fresh_var(hint)

    def _emit(self, step, nids=1):
        self.stream.write(format_step(step) + "\n")
        self.steps += 1
        first = self.next_id
        self.next_id += nids
        return first

    def rup(self, c: PbConstraint) -> int:
        return self._emit(Rup(c))

    def pol(self, tokens) -> int:
        return self._emit(CuttingPlanes(list(tokens)))

    def reify(self, x: int, direction: str, c: PbConstraint):
        first = self._emit(Reify(x, direction, c), 2 if direction == EQUIV else 1)
        return (first, first + 1) if direction == EQUIV else first

    def log_solution(self, alpha: dict, cost: int) -> int:
        self.best_solution_id = self._emit(LogSolution(alpha, cost))
        return self.best_solution_id

    def log_reified_sic(self, objective: Objective, bound: int) -> SicRecord:
        """Fresh ``r`` with ``r <=> (objective < bound)``."""
        c = at_most(objective, bound - 1)
        r = self.register_fresh_var("sic")
        fwd, rev = self.reify(r, EQUIV, c)
        return SicRecord(r, fwd, rev, c)

    def lower_bound_from_sic(self, sic: SicRecord, not_r_id: int) -> int:
        """Derive ``objective >= bound`` from ``~r >= 1`` and the reverse reification."""
        k = sic.constraint.coef_sum() - sic.constraint.degree + 1
        if k <= 0:
            # the bound is at most the objective constant: trivially true
            return self.rup(PbConstraint((), 0))
        return self.pol([sic.reverse_id, not_r_id, k, "*", "+"])

    def log_core(self, core_constraint: PbConstraint, derivation=None) -> int:
        """Register a core; an input constraint id is aliased via ``id 1 *``."""
        if derivation is None:
            return self.rup(core_constraint)
        if isinstance(derivation, int):
            return self.pol([derivation, 1, "*"])
        return self.pol(derivation)

    def conclude_optimal(self, cost: int):
        self._emit(Conclude("OPT", cost), 0)

    def conclude_unsat(self):
        self._emit(Conclude("UNSAT"), 0)


class NullLogger:
    """Proof logging switched off: every call is a no-op."""

    enabled = False

    def __init__(self, vars: VarManager):
        self.vars = vars

    def register_fresh_var(self, hint: str = "") -> int:
        return self.vars.register_fresh_var(hint)

    def _noop(self, *args, **kwargs):
        return None

    rup = pol = reify = log_solution = log_reified_sic = _noop
    lower_bound_from_sic = log_core = conclude_optimal = conclude_unsat = _noop


# --- parsing -------------------------------------------------------------------

_LIT = re.compile(r"(~?)x(\d+)$", re.ASCII)


class ProofSyntaxError(ValueError):
    pass


def _parse_lit(tok):
    m = _LIT.match(tok)
    if not m:
        raise ProofSyntaxError(f"bad literal {tok!r}")
    v = int(m.group(2))
    if v == 0:
        raise ProofSyntaxError("variable index 0")
    return -v if m.group(1) else v


def _parse_constraint(tokens) -> PbConstraint:
    if not tokens or tokens[-1] != ";":
        raise ProofSyntaxError("constraint must end with ';'")
    tokens = tokens[:-1]
    if len(tokens) < 2 or tokens[-2] != ">=":
        raise ProofSyntaxError("expected '>= degree'")
    try:
        degree = int(tokens[-1])
        body = tokens[:-2]
        if len(body) % 2:
            raise ProofSyntaxError("unpaired term")
        terms = [(int(body[i]), _parse_lit(body[i + 1])) for i in range(0, len(body), 2)]
    except ValueError as e:
        raise ProofSyntaxError(str(e)) from None
    if any(a <= 0 for a, _ in terms) or degree < 0 or len({var(l) for _, l in terms}) != len(terms):
        raise ProofSyntaxError("constraint not in normal form")
    return make_constraint(terms, degree)


def parse_step(line: str):
    toks = line.split()
    head, rest = toks[0], toks[1:]
    if head == "rup":
        return Rup(_parse_constraint(rest))
    if head == "pol":
        if not rest or rest[-1] != ";":
            raise ProofSyntaxError("pol must end with ';'")
        return CuttingPlanes(rest[:-1])
    if head == "reify":
        if len(rest) < 2 or rest[1] not in (IMPLIES, IMPLIED_BY, EQUIV):
            raise ProofSyntaxError("expected 'reify x<k> <dir> <constraint>'")
        x = _parse_lit(rest[0])
        if x < 0:
            raise ProofSyntaxError("reification variable must be positive")
        return Reify(x, rest[1], _parse_constraint(rest[2:]))
    if head == "soli":
        if len(rest) < 2 or rest[-1] != ";":
            raise ProofSyntaxError("expected 'soli <cost> <lits> ;'")
        try:
            c = int(rest[0])
        except ValueError:
            raise ProofSyntaxError("bad cost") from None
        alpha = {}
        for t in rest[1:-1]:
            l = _parse_lit(t)
            if var(l) in alpha:
                raise ProofSyntaxError(f"x{var(l)} assigned twice")
            alpha[var(l)] = 1 if l > 0 else 0
        return LogSolution(alpha, c)
    if head == "conclude":
        if rest[:1] == ["OPT"] and len(rest) == 2:
            try:
                return Conclude("OPT", int(rest[1]))
            except ValueError:
                raise ProofSyntaxError("bad cost") from None
        if rest == ["UNSAT"]:
            return Conclude("UNSAT")
        raise ProofSyntaxError("expected 'conclude OPT <c>' or 'conclude UNSAT'")
    raise ProofSyntaxError(f"unknown rule {head!r}")


def parse_proof(text: str) -> ProofLog:
    lines = [l for l in text.splitlines() if l.strip() and not l.startswith("*")]
    if len(lines) < 2 or lines[0].split() != ["ihsproof", "1"]:
        raise ProofSyntaxError("missing 'ihsproof 1' header")
    f = lines[1].split()
    if len(f) != 2 or f[0] != "f" or not f[1].isdigit():
        raise ProofSyntaxError("missing 'f <count>' line")
    # steps are parsed lazily by the checker so errors carry a step index
    return ProofLog(int(f[1]), lines[2:])


# --- checking ------------------------------------------------------------------

@dataclass
class CheckResult:
    accepted: bool
    cost: int | None = None
    step: int | None = None
    reason: str = ""

    def __bool__(self):
        return self.accepted


class _Reject(Exception):
    pass


class _Database:
    """Constraint store with root-level unit propagation for RUP checks.

    Clause-like constraints (every coefficient reaches the degree) use two
    watched literals; the rest keep a slack counter.
    """

    def __init__(self):
        self.cons = []
        self.slack = []
        self.occ = {}
        self.lits = []      # clause literal lists, None for counter constraints
        self.watches = {}
        self.val = [None]   # by variable: None, 0 or 1
        self.trail = []
        self.qhead = 0
        self.conflict = False
        self.contradiction = False

    def _value(self, l):
        v = l if l > 0 else -l
        if v >= len(self.val):
            return None
        x = self.val[v]
        if x is None:
            return None
        return x if l > 0 else 1 - x

    def _grow(self, terms):
        top = max((abs(l) for _, l in terms), default=0)
        if top >= len(self.val):
            self.val.extend([None] * (top + 1 - len(self.val)))

    def _attach(self, c: PbConstraint, watched=True):
        """Returns True when the new constraint is falsified."""
        ci = len(self.cons)
        terms = sorted(c.terms, key=lambda t: -t[0])
        self._grow(terms)
        self.cons.append((terms, c.degree))
        if watched and c.degree >= 1 and terms and terms[-1][0] >= c.degree:
            self.slack.append(0)
            lits = sorted((l for _, l in terms), key=lambda l: self._value(l) == 0)
            self.lits.append(lits)
            for l in lits[:2]:
                self.watches.setdefault(l, []).append(ci)
            if self._value(lits[0]) == 0:
                return True
            if len(lits) == 1 or self._value(lits[1]) == 0:
                if self._value(lits[0]) is None:
                    self._set(lits[0])
            return False
        self.lits.append(None)
        s = -c.degree
        for a, l in terms:
            self.occ.setdefault(l, []).append((ci, a))
            if self._value(l) != 0:
                s += a
        self.slack.append(s)
        return self._scan(ci)

    def _detach_last(self):
        terms, _ = self.cons.pop()
        self.slack.pop()
        self.lits.pop()
        for a, l in terms:
            self.occ[l].pop()

    def _scan(self, ci):
        s = self.slack[ci]
        if s < 0:
            return True
        val = self.val
        for a, l in self.cons[ci][0]:
            if a <= s:
                break
            if val[l if l > 0 else -l] is None:
                self._set(l)
        return False

    def _set(self, l):
        self.val[l if l > 0 else -l] = 1 if l > 0 else 0
        self.trail.append(l)

    def _propagate(self):
        slack = self.slack
        while self.qhead < len(self.trail):
            l = self.trail[self.qhead]
            self.qhead += 1
            hit = False
            for ci, a in self.occ.get(-l, ()):
                slack[ci] -= a
                if not hit and self._scan(ci):
                    hit = True
            if hit:
                return True
            if self._propagate_clauses(-l):
                return True
        return False

    def _propagate_clauses(self, false_lit):
        ws = self.watches.get(false_lit)
        if not ws:
            return False
        val, lits, watches = self.val, self.lits, self.watches
        keep = []
        for n, ci in enumerate(ws):
            c = lits[ci]
            if c[0] == false_lit:
                c[0], c[1] = c[1], false_lit
            first = c[0]
            v0 = val[first if first > 0 else -first]
            if v0 is not None and v0 == (first > 0):
                keep.append(ci)
                continue
            for k in range(2, len(c)):
                l = c[k]
                vl = val[l if l > 0 else -l]
                if vl is None or vl == (l > 0):
                    c[1], c[k] = l, false_lit
                    w = watches.get(l)
                    if w is None:
                        watches[l] = [ci]
                    else:
                        w.append(ci)
                    break
            else:
                keep.append(ci)
                if v0 is None:
                    self._set(first)
                else:
                    keep.extend(ws[n + 1:])
                    ws[:] = keep
                    return True
        ws[:] = keep
        return False

    def _undo(self, mark):
        for i in range(len(self.trail) - 1, mark - 1, -1):
            l = self.trail[i]
            if i < self.qhead:
                for ci, a in self.occ.get(-l, ()):
                    self.slack[ci] += a
            self.val[l if l > 0 else -l] = None
        del self.trail[mark:]
        self.qhead = min(self.qhead, mark)

    def add(self, c: PbConstraint):
        if c.is_contradiction():
            self.contradiction = True
        if self.conflict:
            self.cons.append((list(c.terms), c.degree))
            self.slack.append(0)
            self.lits.append(None)
            return
        if self._attach(c) or self._propagate():
            self.conflict = True

    def implies_by_rup(self, c: PbConstraint) -> bool:
        if self.conflict:
            return True
        mark = len(self.trail)
        ok = self._attach(negate(c), watched=False) or self._propagate()
        self._undo(mark)
        self._detach_last()
        return ok

    def get(self, cid) -> PbConstraint:
        terms, degree = self.cons[cid - 1]
        return make_constraint(terms, degree)


def _cp_add(c1, c2):
    return make_constraint(list(c1.terms) + list(c2.terms), c1.degree + c2.degree)


def _cp_mul(c, k):
    return make_constraint([(a * k, l) for a, l in c.terms], c.degree * k)


def _cp_div(c, k):
    return make_constraint([(-(-a // k), l) for a, l in c.terms], -(-c.degree // k))


def _cp_sat(c):
    return make_constraint([(min(a, c.degree), l) for a, l in c.terms], c.degree)


def _eval_pol(tokens) -> PbConstraint:
    stack = []
    for tok in tokens:
        if isinstance(tok, PbConstraint):
            stack.append(tok)
        elif tok == "+":
            if len(stack) < 2 or not all(isinstance(x, PbConstraint) for x in stack[-2:]):
                raise _Reject("'+' needs two constraints")
            b, a = stack.pop(), stack.pop()
            stack.append(_cp_add(a, b))
        elif tok in ("*", "d"):
            if len(stack) < 2 or not isinstance(stack[-1], int) or not isinstance(stack[-2], PbConstraint):
                raise _Reject(f"'{tok}' needs a constraint and a constant")
            k, c = stack.pop(), stack.pop()
            if k <= 0:
                raise _Reject(f"'{tok}' needs a positive constant")
            stack.append(_cp_mul(c, k) if tok == "*" else _cp_div(c, k))
        elif tok == "s":
            if not stack or not isinstance(stack[-1], PbConstraint):
                raise _Reject("'s' needs a constraint")
            stack.append(_cp_sat(stack.pop()))
        elif tok.lstrip("~").startswith("x"):
            try:
                l = _parse_lit(tok)
            except ProofSyntaxError as e:
                raise _Reject(str(e)) from None
            stack.append(make_constraint([(1, l)], 0))
        else:
            try:
                stack.append(int(tok))
            except ValueError:
                raise _Reject(f"bad token {tok!r}") from None
    if len(stack) != 1 or not isinstance(stack[0], PbConstraint):
        raise _Reject("postfix expression does not reduce to one constraint")
    return stack[0]


def _resolve_ids(tokens, db, nids):
    """Replace id tokens by constraints; constants are the numbers followed by '*' or 'd'."""
    out = []
    toks = [str(t) for t in tokens]
    for i, t in enumerate(toks):
        nxt = toks[i + 1] if i + 1 < len(toks) else None
        if t.lstrip("-").isdigit() and nxt not in ("*", "d"):
            out.append(_lookup(int(t), db, nids))
        else:
            out.append(t)
    return out


def _lookup(cid, db, nids):
    if not 1 <= cid <= nids:
        raise _Reject(f"unknown constraint id {cid}")
    return db.get(cid)


def check(instance: Instance, proof) -> CheckResult:
    """Replay ``proof`` against ``instance``; accept with the certified optimal cost."""
    if isinstance(proof, str):
        try:
            proof = parse_proof(proof)
        except ProofSyntaxError as e:
            return CheckResult(False, step=0, reason=str(e))
    if proof.num_inputs != len(instance.constraints):
        return CheckResult(False, step=0, reason="input constraint count mismatch")
    obj = instance.objective
    db = _Database()
    for c in instance.constraints:
        db.add(c)
    nids = len(instance.constraints)
    used = set(range(1, instance.nvars + 1))
    best = None
    for i, raw in enumerate(proof.steps, start=1):
        try:
            step = parse_step(raw) if isinstance(raw, str) else raw
            if isinstance(step, Rup):
                used |= step.constraint.vars
                if not db.implies_by_rup(step.constraint):
                    raise _Reject("RUP check failed")
                db.add(step.constraint)
                nids += 1
            elif isinstance(step, CuttingPlanes):
                toks = _resolve_ids(step.tokens, db, nids)
                c = _eval_pol(toks)
                used |= c.vars
                db.add(c)
                nids += 1
            elif isinstance(step, Reify):
                if step.var in used or step.var in step.constraint.vars:
                    raise _Reject(f"reification variable x{step.var} is not fresh")
                used |= step.constraint.vars | {step.var}
                for c in reify_constraints(step.var, step.direction, step.constraint):
                    db.add(c)
                    nids += 1
            elif isinstance(step, LogSolution):
                alpha = step.assignment
                if set(alpha) != set(range(1, instance.nvars + 1)):
                    raise _Reject("solution must assign exactly the instance variables")
                if not all(evaluate(c, alpha) for c in instance.constraints):
                    raise _Reject("logged solution violates an input constraint")
                if objective_cost(obj, alpha) != step.cost:
                    raise _Reject(f"cost mismatch: claimed {step.cost}, actual {objective_cost(obj, alpha)}")
                best = step.cost if best is None else min(best, step.cost)
                db.add(at_most(obj, step.cost - 1))
                nids += 1
            elif isinstance(step, Conclude):
                if not db.contradiction:
                    raise _Reject("no contradiction derived")
                if step.kind == "UNSAT":
                    if best is not None:
                        raise _Reject("infeasibility claimed after logging a solution")
                    if i != len(proof.steps):
                        raise _Reject("steps after conclusion")
                    return CheckResult(True, None)
                if best is None or step.cost != best:
                    raise _Reject(f"claimed optimum {step.cost} is not the best logged cost {best}")
                if i != len(proof.steps):
                    raise _Reject("steps after conclusion")
                return CheckResult(True, step.cost)
        except (_Reject, ProofSyntaxError) as e:
            return CheckResult(False, step=i, reason=str(e))
    return CheckResult(False, step=len(proof.steps), reason="missing conclusion")
