"""Reading and writing the OPB format, plus competition-style result lines."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from .core import GE, LE, EQ, Instance, Objective, normalize

_HEADER = re.compile(r"#variable=\s*(\d+)\s+#constraint=\s*(\d+)", re.ASCII)
_CONSTANT = re.compile(r"^\*\s*objective constant\s+([+-]?\d+)\s*$", re.ASCII)
_TOKEN = re.compile(r"\S+")
_LIT = re.compile(r"(~?)x(\d+)$", re.ASCII)
_INT = re.compile(r"[+-]?\d+$", re.ASCII)

log = logging.getLogger(__name__)


@dataclass
class ParseDiagnostic:
    line: int
    column: int
    message: str
    severity: str = "error"

    def __str__(self):
        return f"{self.line}:{self.column}: {self.severity}: {self.message}"


class OpbParseError(ValueError):
    def __init__(self, diagnostic: ParseDiagnostic):
        super().__init__(str(diagnostic))
        self.diagnostic = diagnostic


def _fail(line, col, msg):
    raise OpbParseError(ParseDiagnostic(line, col, msg))


def _parse_terms(tokens, lineno, declared):
    """Parse ``coef lit`` pairs; returns list of (coef, lit)."""
    terms = []
    i = 0
    while i < len(tokens):
        col, tok = tokens[i]
        if not _INT.match(tok):
            _fail(lineno, col, f"expected coefficient, got {tok!r}")
        if i + 1 >= len(tokens):
            _fail(lineno, col, "coefficient without literal")
        lcol, ltok = tokens[i + 1]
        m = _LIT.match(ltok)
        if not m:
            _fail(lineno, lcol, f"expected literal, got {ltok!r}")
        idx = int(m.group(2))
        if idx == 0:
            _fail(lineno, lcol, "variable index 0")
        if declared is not None and idx > declared:
            _fail(lineno, lcol, f"variable x{idx} exceeds declared #variable= {declared}")
        terms.append((int(tok), -idx if m.group(1) else idx))
        i += 2
    return terms


def parse_opb(text) -> Instance:
    """Parse OPB text into a normalized :class:`Instance`.

    Raises :class:`OpbParseError` carrying a :class:`ParseDiagnostic`.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8", errors="replace")
    declared = declared_constraints = None
    objective = None
    constant = 0
    constraints = []
    nlines = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("*"):
            m = _HEADER.search(stripped)
            if m and declared is None and nlines == 0 and objective is None:
                declared = int(m.group(1))
                declared_constraints = int(m.group(2))
            m = _CONSTANT.match(stripped)
            if m:
                constant += int(m.group(1))
            continue
        tokens = [(m.start() + 1, m.group()) for m in _TOKEN.finditer(line)]
        if tokens[-1][1] != ";" and not tokens[-1][1].endswith(";"):
            _fail(lineno, len(line.rstrip()) + 1, "missing ';'")
        # split a trailing ';' glued to the last token
        col, last = tokens[-1]
        if last != ";":
            tokens[-1] = (col, last[:-1])
            tokens.append((col + len(last) - 1, ";"))
        tokens = tokens[:-1]
        if any(t == ";" for _, t in tokens):
            col = next(c for c, t in tokens if t == ";")
            _fail(lineno, col, "multiple ';' on one line")
        if tokens and tokens[0][1] in ("min:", "min"):
            if objective is not None:
                _fail(lineno, tokens[0][0], "duplicate objective line")
            body = tokens[1:]
            if tokens[0][1] == "min":
                if not body or body[0][1] != ":":
                    _fail(lineno, tokens[0][0], "expected 'min:'")
                body = body[1:]
            objective = Objective.from_raw(_parse_terms(body, lineno, declared))
            continue
        if tokens and tokens[0][1].startswith(("max", "min")):
            _fail(lineno, tokens[0][0], f"unsupported objective token {tokens[0][1]!r}")
        rel_at = [i for i, (_, t) in enumerate(tokens) if t in (GE, LE, EQ)]
        if len(rel_at) != 1:
            col = tokens[rel_at[1]][0] if len(rel_at) > 1 else (tokens[0][0] if tokens else 1)
            _fail(lineno, col, "expected exactly one relation (>=, <=, =)")
        r = rel_at[0]
        if r != len(tokens) - 2:
            col = tokens[min(r + 1, len(tokens) - 1)][0]
            _fail(lineno, col, "expected a single integer right-hand side")
        rcol, rhs = tokens[-1]
        if not _INT.match(rhs):
            _fail(lineno, rcol, f"expected integer right-hand side, got {rhs!r}")
        terms = _parse_terms(tokens[:r], lineno, declared)
        nlines += 1
        constraints.extend(normalize(terms, tokens[r][1], int(rhs)))
    objective = objective or Objective()
    if constant:
        objective = Objective(objective.terms, objective.constant + constant)
    if declared_constraints is not None and declared_constraints != nlines:
        log.warning("header declares %d constraints, found %d", declared_constraints, nlines)
    return Instance(constraints, objective, declared or 0)


def write_opb(inst: Instance) -> str:
    """Emit ``inst`` as OPB text; normalized constraints are written with ``>=``."""
    lines = [f"* #variable= {inst.nvars} #constraint= {len(inst.constraints)}"]
    obj = inst.objective
    terms = " ".join(f"+{w} {_lit(l)}" for w, l in obj.terms)
    lines.append(f"min: {terms} ;" if terms else "min: ;")
    if obj.constant:
        # plain OPB has no objective constant; parse_opb reads this comment back
        lines.append(f"* objective constant {obj.constant}")
    for c in inst.constraints:
        lhs = " ".join(f"+{a} {_lit(l)}" for a, l in c.terms)
        lines.append(f"{lhs} >= {c.degree} ;" if lhs else f">= {c.degree} ;")
    return "\n".join(lines) + "\n"


def _lit(l):
    return f"x{l}" if l > 0 else f"~x{-l}"


OPTIMUM, SATISFIABLE, UNSATISFIABLE, UNKNOWN = "OPTIMUM", "SATISFIABLE", "UNSATISFIABLE", "UNKNOWN"

_STATUS_LINE = {
    OPTIMUM: "OPTIMUM FOUND",
    SATISFIABLE: "SATISFIABLE",
    UNSATISFIABLE: "UNSATISFIABLE",
    UNKNOWN: "UNKNOWN",
}


def emit_result(status: str, cost=None, alpha=None, improving=()) -> str:
    if status in (OPTIMUM, SATISFIABLE) and (cost is None or alpha is None):
        raise ValueError(f"{status} requires a cost and an assignment")
    out = [f"o {c}" for c in improving if c != cost]
    if cost is not None:
        out.append(f"o {cost}")
    out.append(f"s {_STATUS_LINE[status]}")
    if alpha is not None:
        out.append("v " + " ".join(f"x{v}" if alpha[v] else f"-x{v}" for v in sorted(alpha)))
    return "\n".join(out)
