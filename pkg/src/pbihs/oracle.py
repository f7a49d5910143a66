"""Assumption-based conflict-driven PB solver and weight-aware core extraction.

Propagation keeps, per constraint, the slack ``sum of coefficients of
non-falsified literals - degree``; a literal whose coefficient exceeds the
slack is implied.  Conflict analysis learns clauses (1UIP) from clausal
explanations of PB propagations, and failed assumptions yield clausal cores
``sum(lits) >= 1``.
"""

from __future__ import annotations

import time
from bisect import bisect_left
from dataclasses import dataclass, field

from .core import PbConstraint, Objective, clause, var

SAT, UNSAT = True, False
RESTART_UNIT = 64


class Infeasible(Exception):
    """The formula has no solution at all."""


class Timeout(Exception):
    pass


def luby(i: int) -> int:
    """i-th element (0-based) of the Luby sequence 1,1,2,1,1,2,4,..."""
    size, seq = 1, 0
    while size < i + 1:
        seq += 1
        size = 2 * size + 1
    while size - 1 != i:
        size = (size - 1) >> 1
        seq -= 1
        i = i % size
    return 1 << seq


@dataclass(frozen=True)
class Core:
    constraint: PbConstraint

    @property
    def id(self):
        return self.constraint.id


@dataclass
class OracleResult:
    sat: bool
    assignment: dict | None = None
    core: Core | None = None


@dataclass
class ExtractCoresResult:
    new_cores: list
    witness: dict


_UNSCANNED = float("inf")


def _idx(lit):
    return 2 * lit if lit > 0 else -2 * lit + 1


class PbSolver:
    """Incremental CDCL solver over normalized PB constraints.

    Constraints of degree 1 are clauses and use two watched literals; all
    others keep a slack counter.  ``logger`` (optional) receives every
    learned clause and every core as a RUP step; ``guard`` literals are
    appended to logged clauses only.
    """

    def __init__(self, nvars: int = 0, logger=None, guard=()):
        self.nvars = 0
        self.val = [None]
        self.level = [0]
        # reason: None (decision/assumption), ci >= 0 (PB constraint) or ~k (clause k)
        self.reason = [None]
        self.pos = [0]
        self.occ = [[], []]
        self.watches = [[], []]   # clause ids watching a literal
        self.blockers = [[], []]  # parallel: another literal of that clause
        self.cons = []  # (terms sorted by coef desc, degree)
        self.total = []
        self.coef = []
        self.negcoef = []   # -coefficients, ascending, for bisect
        self.scanned = []   # terms with coefficient > scanned[ci] are all assigned
        self.maxcoef = []
        self.slack = []
        self.clauses = []
        self.learnts = []
        self.trail = []
        self.trail_lim = []
        self.qhead = 0
        self.ok = True
        self.logger = logger
        self.guard = list(guard)
        self.model = None
        self.core = None
        self.core_id = None
        self.root_id = None
        self.conflicts = 0
        self.effort = 0
        self._restarts = 0
        self._max_learnts = 2000
        self.ensure_vars(nvars)

    # -- variables and constraints -----------------------------------------

    def ensure_vars(self, n: int):
        while self.nvars < n:
            self.nvars += 1
            self.val.append(None)
            self.level.append(0)
            self.reason.append(None)
            self.pos.append(0)
            self.occ += [[], []]
            self.watches += [[], []]
            self.blockers += [[], []]

    def value(self, lit):
        v = self.val[lit if lit > 0 else -lit]
        if v is None:
            return None
        return v if lit > 0 else 1 - v

    def add_constraint(self, c: PbConstraint):
        """Add a normalized constraint at decision level 0."""
        self._add(list(c.terms), c.degree)

    def add_clause(self, lits):
        self._add([(1, l) for l in lits], 1)

    def _add(self, terms, degree):
        if not self.ok:
            return
        self._backtrack(0)
        if degree <= 0:
            return
        self.ensure_vars(max((var(l) for _, l in terms), default=0))
        if degree == 1:
            self._add_clause([l for _, l in terms])
        else:
            self._add_pb(terms, degree)
        if self.ok and self._propagate() is not None:
            self._root_conflict()

    def _add_clause(self, lits):
        lits = [l for l in dict.fromkeys(lits) if self.value(l) != 0]
        if any(self.value(l) == 1 for l in lits) or any(-l in lits for l in lits):
            return
        if not lits:
            self._root_conflict()
            return
        if len(lits) == 1:
            self._assign(lits[0], None)
            return
        k = len(self.clauses)
        self.clauses.append(lits)
        self._watch(lits[0], k, lits[1])
        self._watch(lits[1], k, lits[0])

    def _add_pb(self, terms, degree):
        terms.sort(key=lambda t: -t[0])
        ci = len(self.cons)
        self.cons.append((terms, degree))
        total = sum(a for a, _ in terms)
        self.total.append(total)
        self.coef.append({l: a for a, l in terms})
        self.negcoef.append([-a for a, _ in terms])
        self.scanned.append(_UNSCANNED)
        self.maxcoef.append(terms[0][0] if terms else 0)
        slack = total - degree
        for a, l in terms:
            self.occ[_idx(l)].append((ci, a))
            if self.value(l) == 0 and self.pos[var(l)] < self.qhead:
                slack -= a
        self.slack.append(slack)
        if slack < 0:
            self._root_conflict()
            return
        for a, l in terms:
            if a <= slack:
                break
            if self.value(l) is None:
                self._assign(l, ci)

    def _watch(self, lit, k, blocker):
        i = _idx(lit)
        self.watches[i].append(k)
        self.blockers[i].append(blocker)

    def _root_conflict(self):
        if self.ok:
            self.ok = False
            self.root_id = self._log([])

    def _log(self, lits):
        if self.logger is not None:
            return self.logger.rup(clause(list(lits) + self.guard))
        return None

    # -- trail ---------------------------------------------------------------

    def _assign(self, lit, reason):
        v = lit if lit > 0 else -lit
        self.val[v] = 1 if lit > 0 else 0
        self.level[v] = len(self.trail_lim)
        self.reason[v] = reason
        self.pos[v] = len(self.trail)
        self.trail.append(lit)

    def _backtrack(self, lvl):
        if len(self.trail_lim) <= lvl:
            return
        start = self.trail_lim[lvl]
        slack, occ, val, reason, trail = self.slack, self.occ, self.val, self.reason, self.trail
        qhead = self.qhead
        scanned = self.scanned
        for i in range(len(trail) - 1, start - 1, -1):
            lit = trail[i]
            pi = 2 * lit if lit > 0 else -2 * lit + 1
            for ci, _ in occ[pi]:
                scanned[ci] = _UNSCANNED
            if i < qhead:
                for ci, a in occ[pi ^ 1]:
                    slack[ci] += a
                    scanned[ci] = _UNSCANNED
            v = lit if lit > 0 else -lit
            val[v] = None
            reason[v] = None
        del trail[start:]
        del self.trail_lim[lvl:]
        self.qhead = min(qhead, start)

    def _propagate(self):
        """Returns None, or the reason code of a falsified constraint."""
        slack, cons, maxcoef, val = self.slack, self.cons, self.maxcoef, self.val
        scanned, negcoef = self.scanned, self.negcoef
        clauses, watches, blockers, trail = self.clauses, self.watches, self.blockers, self.trail
        while self.qhead < len(trail):
            p = trail[self.qhead]
            self.qhead += 1
            conflict = None
            np = 2 * p + 1 if p > 0 else -2 * p   # index of ~p
            occ = self.occ[np]
            self.effort += len(occ)
            for ci, a in occ:
                s = slack[ci] - a
                slack[ci] = s
                if conflict is not None:
                    continue
                if s < 0:
                    conflict = ci
                elif s < maxcoef[ci] and s < scanned[ci]:
                    terms = cons[ci][0]
                    hi = scanned[ci]
                    start = 0 if hi == _UNSCANNED else bisect_left(negcoef[ci], -hi)
                    for t in range(start, len(terms)):
                        b, l = terms[t]
                        if b <= s:
                            break
                        if val[l if l > 0 else -l] is None:
                            self._assign(l, ci)
                    scanned[ci] = s
            if conflict is not None:
                return conflict
            # clauses watching ~p
            ws = watches[np]
            bs = blockers[np]
            self.effort += len(ws)
            false_lit = -p
            i = j = 0
            n = len(ws)
            while i < n:
                k = ws[i]
                b = bs[i]
                i += 1
                vb = val[b if b > 0 else -b]
                if vb is not None and vb == (b > 0):
                    ws[j] = k
                    bs[j] = b
                    j += 1
                    continue
                c = clauses[k]
                if c is None:
                    continue
                if c[0] == false_lit:
                    c[0], c[1] = c[1], false_lit
                first = c[0]
                vf = val[first if first > 0 else -first]
                if vf is not None and vf == (first > 0):
                    ws[j] = k
                    bs[j] = first
                    j += 1
                    continue
                for t in range(2, len(c)):
                    l = c[t]
                    vl = val[l if l > 0 else -l]
                    if vl is None or vl == (l > 0):
                        c[1], c[t] = l, false_lit
                        li = 2 * l if l > 0 else -2 * l + 1
                        watches[li].append(k)
                        blockers[li].append(first)
                        break
                else:
                    ws[j] = k
                    bs[j] = first
                    j += 1
                    if vf is None:
                        self._assign(first, ~k)
                    else:
                        while i < n:
                            ws[j] = ws[i]
                            bs[j] = bs[i]
                            j += 1
                            i += 1
                        del ws[j:]
                        del bs[j:]
                        return ~k
            del ws[j:]
            del bs[j:]
        return None

    # -- explanations --------------------------------------------------------

    def _explain(self, r, lit=None):
        """False literals of reason ``r`` that imply ``lit`` (or the conflict)."""
        if r < 0:
            c = self.clauses[~r]
            return [l for l in c if l != lit]
        terms, degree = self.cons[r]
        need = self.total[r] - degree  # remove more than this much to force
        pos, val = self.pos, self.val
        if lit is None:
            limit = len(self.trail)
        else:
            limit = pos[lit if lit > 0 else -lit]
            need -= self.coef[r][lit]
        # largest coefficients first keeps the explanation short
        out, removed = [], 0
        for a, l in terms:
            v = l if l > 0 else -l
            x = val[v]
            if x is None or x == (l > 0) or pos[v] >= limit:
                continue
            out.append(l)
            removed += a
            if removed > need:
                break
        return out

    def _analyze(self, confl):
        seen = set()
        learnt = [None]
        counter = 0
        cur = len(self.trail_lim)
        level, trail, reason = self.level, self.trail, self.reason
        lits = self._explain(confl)
        idx = len(trail) - 1
        while True:
            for q in lits:
                v = q if q > 0 else -q
                if v not in seen and level[v] > 0:
                    seen.add(v)
                    if level[v] >= cur:
                        counter += 1
                    else:
                        learnt.append(q)
            while abs(trail[idx]) not in seen:
                idx -= 1
            p = trail[idx]
            idx -= 1
            counter -= 1
            if counter <= 0:
                break
            lits = self._explain(reason[abs(p)], p)
        learnt[0] = -p
        learnt = self._minimize(learnt, seen)
        bt = max((level[abs(l)] for l in learnt[1:]), default=0)
        return learnt, bt

    def _minimize(self, learnt, seen):
        """Drop literals implied by the rest of the clause (recursive minimization)."""
        keep = {abs(l) for l in learnt}
        level, reason, val = self.level, self.reason, self.val
        levels = {level[abs(l)] for l in learnt[1:]}
        redundant = {}

        def implied(v):
            stack, visited = [v], []
            while stack:
                u = stack.pop()
                lit = u if val[u] == 1 else -u
                for q in self._explain(reason[u], lit):
                    w = q if q > 0 else -q
                    if w in keep or level[w] == 0:
                        continue
                    known = redundant.get(w)
                    if known:
                        continue
                    if known is False or reason[w] is None or level[w] not in levels:
                        for x in visited:
                            redundant[x] = False
                        redundant[v] = False
                        return False
                    if w not in visited:
                        visited.append(w)
                        stack.append(w)
            for x in visited:
                redundant[x] = True
            return True

        out = [learnt[0]]
        for l in learnt[1:]:
            v = abs(l)
            if reason[v] is None or not implied(v):
                out.append(l)
        return out

    def _analyze_final(self, p):
        """Clause over negated assumptions explaining that ``p`` is true."""
        out = [p]
        if not self.trail_lim:
            return out
        seen = {var(p)}
        for i in range(len(self.trail) - 1, self.trail_lim[0] - 1, -1):
            lit = self.trail[i]
            v = var(lit)
            if v not in seen:
                continue
            r = self.reason[v]
            if r is None:
                out.append(-lit)
            else:
                for q in self._explain(r, lit):
                    if self.level[var(q)] > 0:
                        seen.add(var(q))
        return out

    # -- search --------------------------------------------------------------

    def solve(self, assumptions=(), conflict_budget=None, deadline=None):
        """Return True (model in ``self.model``), False (core in ``self.core``)
        or None when the conflict budget ran out."""
        self.model = self.core = self.core_id = None
        assumptions = list(assumptions)
        if assumptions:
            self.ensure_vars(max(var(a) for a in assumptions))
        if not self.ok:
            self.core, self.core_id = [], self.root_id
            return UNSAT
        self._backtrack(0)
        if self._propagate() is not None:
            self._root_conflict()
            self.core, self.core_id = [], self.root_id
            return UNSAT
        used = 0
        limit = luby(self._restarts) * RESTART_UNIT
        since_restart = 0
        nxt = 1
        while True:
            confl = self._propagate()
            if confl is not None:
                self.conflicts += 1
                used += 1
                since_restart += 1
                if not self.trail_lim:
                    self._root_conflict()
                    self.core, self.core_id = [], self.root_id
                    return UNSAT
                learnt, bt = self._analyze(confl)
                self._log(learnt)
                self._backtrack(bt)
                self._add_learnt(learnt)
                nxt = 1
                if conflict_budget is not None and used >= conflict_budget:
                    self._backtrack(0)
                    return None
                if deadline is not None and used % 32 == 0 and time.monotonic() > deadline:
                    self._backtrack(0)
                    raise Timeout()
                if since_restart >= limit:
                    self._restarts += 1
                    limit = luby(self._restarts) * RESTART_UNIT
                    since_restart = 0
                    self._backtrack(0)
                    self._reduce()
                continue
            lvl = len(self.trail_lim)
            if lvl < len(assumptions):
                a = assumptions[lvl]
                va = self.value(a)
                if va == 1:
                    self.trail_lim.append(len(self.trail))
                    continue
                if va == 0:
                    self.core = self._analyze_final(-a)
                    self.core_id = self._log(self.core)
                    self._backtrack(0)
                    return UNSAT
                self.trail_lim.append(len(self.trail))
                self._assign(a, None)
                continue
            while nxt <= self.nvars and self.val[nxt] is not None:
                nxt += 1
            if nxt > self.nvars:
                self.model = {v: self.val[v] for v in range(1, self.nvars + 1)}
                self._backtrack(0)
                return SAT
            self.trail_lim.append(len(self.trail))
            self._assign(-nxt, None)

    def _add_learnt(self, lits):
        if len(lits) == 1:
            self._assign(lits[0], None)
            return
        # second watch: the literal assigned at the highest level
        j = max(range(1, len(lits)), key=lambda i: self.level[var(lits[i])])
        lits[1], lits[j] = lits[j], lits[1]
        k = len(self.clauses)
        self.clauses.append(lits)
        self.learnts.append(k)
        self._watch(lits[0], k, lits[1])
        self._watch(lits[1], k, lits[0])
        self._assign(lits[0], ~k)

    def _reduce(self):
        """At level 0: forget the longer half of the older learned clauses."""
        if len(self.learnts) <= self._max_learnts:
            return
        half = len(self.learnts) // 2
        old, recent = self.learnts[:half], self.learnts[half:]
        old.sort(key=lambda k: (len(self.clauses[k]), k))
        keep = old[: len(old) // 2]
        for k in old[len(old) // 2:]:
            if len(self.clauses[k]) > 2:
                self.clauses[k] = None
            else:
                keep.append(k)
        self.learnts = sorted(keep) + recent
        self._max_learnts += self._max_learnts // 10


def solve(formula, assumptions=(), logger=None) -> OracleResult:
    """One-shot decision call: SAT with a model or UNSAT with a clausal core."""
    formula = list(formula)
    s = PbSolver(max([0] + [max(c.vars, default=0) for c in formula]), logger=logger)
    for c in formula:
        s.add_constraint(c)
    res = s.solve(assumptions)
    if res:
        return OracleResult(True, assignment=s.model)
    return OracleResult(False, core=Core(clause(s.core).with_id(s.core_id)))


class CoreExtractor:
    """Decision oracle over the instance formula, kept alive for the whole run."""

    def __init__(self, instance, logger=None, deadline=None):
        self.instance = instance
        self.objective: Objective = instance.objective
        self.solver = PbSolver(instance.nvars, logger=logger)
        for c in instance.constraints:
            self.solver.add_constraint(c)
        self.deadline = deadline
        self.calls = 0

    def check(self):
        """Feasibility of the formula; returns a solution or raises :class:`Infeasible`."""
        self.calls += 1
        if not self.solver.solve(deadline=self.deadline):
            raise Infeasible()
        return self._project(self.solver.model)

    def _project(self, model):
        return {v: model[v] for v in range(1, self.instance.nvars + 1)}

    def extract_cores(self, gamma) -> ExtractCoresResult:
        """Weight-aware core extraction starting from the objective values of ``gamma``."""
        residual = {}
        assumptions = []
        for w, l in self.objective.terms:
            a = l if gamma.get(var(l), 0) == (1 if l > 0 else 0) else -l
            residual[a] = w
            assumptions.append(a)
        cores = []
        while True:
            self.calls += 1
            if self.solver.solve(assumptions, deadline=self.deadline):
                return ExtractCoresResult(cores, self._project(self.solver.model))
            if not self.solver.core:
                raise Infeasible()
            c = clause(self.solver.core).with_id(self.solver.core_id)
            cores.append(Core(c))
            failed = [-l for l in self.solver.core]
            wmin = min(residual[a] for a in failed)
            for a in failed:
                residual[a] -= wmin
            assumptions = [a for a in assumptions if residual[a] > 0]
