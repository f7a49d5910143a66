"""Benchmark harness: every instance of a directory under every configuration."""

from __future__ import annotations

import csv
import io
import logging
import os
import time
import tracemalloc
from dataclasses import dataclass, replace
from pathlib import Path

from .hs import BACKENDS, HYBRIDS, NONE, BackendConfig
from .ihs import RunConfig, ihs_solve
from .opb import OPTIMUM, UNKNOWN, UNSATISFIABLE, parse_opb

log = logging.getLogger(__name__)

COLUMNS = ["instance", "config", "status", "cost", "time", "peak_kb", "iterations", "cores", "proof_bytes"]


@dataclass(frozen=True)
class BenchConfig:
    name: str
    run: RunConfig
    proof: bool = False


def parse_config(spec: str, seed: int = 0, cb_budget: int = 100) -> BenchConfig:
    """``backend[/hybrid][+sls][+proof]``, e.g. ``cg``, ``sis-reified/optlb+proof``."""
    parts = spec.strip().split("+")
    head, flags = parts[0], set(parts[1:])
    unknown = flags - {"sls", "proof"}
    if unknown:
        raise ValueError(f"unknown flag(s) {sorted(unknown)} in {spec!r}")
    kind, _, hybrid = head.partition("/")
    hybrid = hybrid or NONE
    if kind not in BACKENDS:
        raise ValueError(f"unknown backend {kind!r} in {spec!r}")
    if hybrid not in HYBRIDS:
        raise ValueError(f"unknown hybrid mode {hybrid!r} in {spec!r}")
    backend = BackendConfig(kind=kind, hybrid=hybrid, use_sls="sls" in flags, cb_budget=cb_budget)
    return BenchConfig(spec.strip(), RunConfig(backend=backend, seed=seed), "proof" in flags)


def parse_configs(spec: str, seed: int = 0, cb_budget: int = 100):
    return [parse_config(s, seed, cb_budget) for s in spec.split(",") if s.strip()]


def run_one(path: Path, bc: BenchConfig, time_limit: float) -> dict:
    row = {"instance": path.name, "config": bc.name, "status": UNKNOWN, "cost": "",
           "time": "", "peak_kb": "", "iterations": "", "cores": "", "proof_bytes": ""}
    tracemalloc.start()
    start = time.monotonic()
    try:
        inst = parse_opb(path.read_bytes())
        proof = io.StringIO() if bc.proof else None
        res = ihs_solve(inst, replace(bc.run, time_limit=time_limit), proof)
        row.update(status=res.status, cost="" if res.cost is None else res.cost,
                   iterations=res.stats.iterations, cores=res.stats.cores)
        if proof is not None:
            row["proof_bytes"] = len(proof.getvalue().encode())
    except Exception as e:  # a broken instance must not stop the sweep
        log.error("%s under %s failed: %s", path.name, bc.name, e)
        row["status"] = f"ERROR:{type(e).__name__}"
    elapsed = time.monotonic() - start
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    row["time"] = f"{time_limit if row['status'] == UNKNOWN else min(elapsed, time_limit):.3f}"
    row["peak_kb"] = peak // 1024
    return row


def summarize(rows, configs) -> str:
    lines = []
    for bc in configs:
        mine = [r for r in rows if r["config"] == bc.name]
        solved = sum(r["status"] in (OPTIMUM, UNSATISFIABLE) for r in mine)
        lines.append(f"{bc.name}: solved {solved}/{len(mine)}")
    return "\n".join(lines) + "\n"


def run_bench(directory, configs, time_limit: float, out_csv, summary_path=None):
    """Run the sweep, appending one CSV row per (instance, config) as it finishes."""
    files = sorted(Path(directory).glob("*.opb"))
    rows = []
    with open(out_csv, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=COLUMNS)
        w.writeheader()
        for path in files:
            for bc in configs:
                row = run_one(path, bc, time_limit)
                rows.append(row)
                w.writerow(row)
                fh.flush()
                os.fsync(fh.fileno())
    summary = summarize(rows, configs)
    summary_path = summary_path or str(out_csv) + ".summary.txt"
    with open(summary_path, "w") as fh:
        fh.write(summary)
    return rows, summary
