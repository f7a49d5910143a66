"""Implicit hitting set optimization for pseudo-Boolean problems."""

from .core import Instance, Objective, PbConstraint, clause, cost, make_constraint, normalize
from .hs import BackendConfig
from .ihs import RunConfig, RunStats, ihs_solve
from .opb import parse_opb, write_opb

__all__ = [
    "Instance", "Objective", "PbConstraint", "clause", "cost", "make_constraint", "normalize",
    "BackendConfig", "RunConfig", "RunStats", "ihs_solve", "parse_opb", "write_opb",
]
