"""Sweep orchestration and CSV emission."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import TextIO

import numpy as np

from ..errors import AEMoDError
from ..optimizer import SolverConfig, objective_min_margin, solve, solve_charging_only
from ..optimizer.search import is_feasible
from ..policies import PolicyKind, fixed_baselines
from ..simulator import SimConfig, simulate
from ..zone_model import DecisionSet, ZoneConfig, fleet_rate_bound
from .config import ExperimentSpec

CSV_COLUMNS = ("sweep_value", "policy", "r_star", "max_response_min", "feasible", "bound_gap", "error")
SIM_COLUMNS = ("sim_max_response_min", "sim_max_class")


@dataclass
class ResultRow:
    sweep_value: float
    policy: str
    r_star: float | None = None
    max_response_min: float | None = None
    feasible: bool | None = None
    bound_gap: float | None = None
    error: str = ""
    sim_max_response_min: float | None = None
    sim_max_class: int | None = None
    decisions: DecisionSet | None = field(default=None, repr=False)
    zone: ZoneConfig | None = field(default=None, repr=False)


@dataclass
class ResultTable:
    rows: list[ResultRow]
    with_sim: bool = False

    @property
    def columns(self) -> tuple[str, ...]:
        return CSV_COLUMNS + (SIM_COLUMNS if self.with_sim else ())

    def select(self, policy: PolicyKind | str) -> list[ResultRow]:
        name = policy.value if isinstance(policy, PolicyKind) else policy
        return [r for r in self.rows if r.policy == name]


def evaluate_policy(
    kind: PolicyKind,
    cfg: ZoneConfig,
    sc: SolverConfig,
    sim: SimConfig | None = None,
    sweep_value: float = math.nan,
) -> ResultRow:
    """Build one policy on one zone and score it. Errors land in the row, not the caller."""
    row = ResultRow(sweep_value=sweep_value, policy=kind.value, zone=cfg)
    try:
        if kind is PolicyKind.OPTIMAL_JOINT:
            d = solve(cfg, sc).decisions
        elif kind is PolicyKind.OPTIMIZED_CHARGE_SAME_CLASS:
            d = solve_charging_only(cfg, np.eye(cfg.n), sc).decisions
        else:
            d = fixed_baselines(cfg)[kind]
    except AEMoDError as exc:
        row.error = f"{type(exc).__name__}: {exc}"
        return row
    r = objective_min_margin(cfg, d)
    ok = is_feasible(cfg, d, r, sc.eps_strict)
    row.decisions = d
    row.r_star = r
    row.feasible = ok
    # unstable charging or customer queues make the response time unbounded
    row.max_response_min = 1.0 / r if ok else math.inf
    if kind.optimized:
        row.bound_gap = fleet_rate_bound(cfg) - r
    if sim is not None and ok:
        rep = simulate(cfg, d, sim)
        row.sim_max_response_min = float(np.nanmax(rep.mean_response))
        row.sim_max_class = rep.max_class
    return row


def run_experiment(spec: ExperimentSpec) -> ResultTable:
    """One row per (sweep value, policy), in sweep order then policy order."""
    sc = spec.solver_config()
    sim = spec.sim_config()
    kinds = spec.policy_kinds()
    if spec.kind == "load_sweep":
        cells = [(v, spec.zone(total_demand=v)) for v in spec.sweep_values]
    elif spec.kind == "charging_sweep":
        cells = [(v, spec.zone(c_points=int(v))) for v in spec.sweep_values]
    else:
        cfg = spec.zone()
        cells = [(cfg.total_demand, cfg)]
        if spec.kind == "single_solve":
            kinds = [PolicyKind.OPTIMAL_JOINT]
            sim = None
    rows = [evaluate_policy(k, cfg, sc, sim, v) for v, cfg in cells for k in kinds]
    return ResultTable(rows, with_sim=sim is not None)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)  # shortest string that reads back to the same double
    return str(value)


def write_csv(table: ResultTable, fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\r\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([_fmt(getattr(row, c)) for c in table.columns])


def emit_csv(table: ResultTable, path: str | Path | None = None) -> str:
    """Write the table as CSV (CRLF line endings). Returns the text; writes ``path`` when given."""
    buf = io.StringIO()
    write_csv(table, buf)
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def read_csv(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
