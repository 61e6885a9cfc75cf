"""Exhaustive grid search over all decision variables (small n only)."""

from __future__ import annotations

import itertools

import numpy as np

from ..errors import ConfigError, NoFeasiblePointError
from ..zone_model import DecisionSet, ZoneConfig, flow_matrices, fleet_rate_bound
from .search import SolveResult, SolverConfig

MAX_FREE_VARS = 6
MAX_EVALUATIONS = 400_000_000
_CHUNK = 2_000_000  # grid points per vectorized batch


def _simplex_grid(size: int, steps: int) -> np.ndarray:
    """All rows of ``size`` grid values in ``{0, 1/(steps-1), ..., 1}`` summing to one."""
    h = steps - 1
    pts = [c for c in itertools.product(range(steps), repeat=size - 1) if sum(c) <= h]
    arr = np.array(pts, dtype=float).reshape(len(pts), size - 1)
    last = h - arr.sum(axis=1, keepdims=True)
    return np.hstack([arr, last]) / h


def free_variable_count(n: int) -> int:
    return n + n * (n - 1) // 2


def brute_force_oracle(cfg: ZoneConfig, sc: SolverConfig | None = None) -> SolveResult:
    """Best feasible point of the uniform grid with ``sc.grid_steps`` values per variable.

    Every ``q_i`` and every free dispatch entry is gridded (the last entry of
    each row is fixed by its row sum). The first best point in enumeration
    order wins ties. Feasibility uses the same ``eps`` slack as the solver.
    """
    sc = sc or SolverConfig()
    n = cfg.n
    if free_variable_count(n) > MAX_FREE_VARS:
        raise ConfigError(f"oracle supports at most {MAX_FREE_VARS} free variables (n <= 3), got n={n}", field="n")
    steps = sc.grid_steps
    eps = sc.eps_strict
    grid = np.linspace(0.0, 1.0, steps)
    row_grids = [_simplex_grid(k + 1, steps) for k in range(n)]
    n_pi = int(np.prod([g.shape[0] for g in row_grids]))
    n_q = steps**n
    if n_q * n_pi > MAX_EVALUATIONS:
        raise ConfigError(
            f"grid of {n_q * n_pi:.3g} points exceeds the {MAX_EVALUATIONS:.3g} cap; lower grid_steps",
            field="grid_steps",
        )

    # all dispatch matrices, flattened (n_pi, n, n)
    pis = np.zeros((n_pi, n, n))
    for idx, rows in enumerate(itertools.product(*row_grids)):
        for k, row in enumerate(rows):
            pis[idx, k, : k + 1] = row

    qs = np.array(list(itertools.product(grid, repeat=n)))
    p = np.asarray(cfg.p)
    lv_p = cfg.lambda_v * p
    partial = (lv_p * (1.0 - qs)).sum(axis=1)
    ok = (partial <= cfg.partial_capacity - eps) & (lv_p[0] * qs[:, 0] <= cfg.mu_c - eps)
    q_ok = np.flatnonzero(ok)
    if q_ok.size == 0:
        raise NoFeasiblePointError("no grid point satisfies the charging-queue constraints", constraint="charging")

    a, b = flow_matrices(cfg)
    lam_c = np.asarray(cfg.lambda_c)
    best_val, best_q, best_pi = -np.inf, -1, -1
    per_chunk = max(1, _CHUNK // n_pi)
    for start in range(0, q_ok.size, per_chunk):
        sel = q_ok[start : start + per_chunk]
        lvc = a + qs[sel] @ b.T  # (Q, n)
        marg = np.einsum("qk,mki->qmi", lvc, pis) - lam_c
        obj = marg.min(axis=2)
        flat = int(np.argmax(obj))
        val = obj.flat[flat]
        if val > best_val:
            best_val = float(val)
            best_q, best_pi = int(sel[flat // n_pi]), flat % n_pi
    if best_val < eps:
        raise NoFeasiblePointError(
            f"best grid point has minimum margin {best_val:.6g} < eps; no feasible grid point",
            constraint="customer_margin",
        )
    d = DecisionSet.from_arrays(qs[best_q], pis[best_pi])
    return SolveResult(
        decisions=d,
        r_star=best_val,
        feasible=True,
        bound_gap=fleet_rate_bound(cfg) - best_val,
        starts_used=0,
        iterations=int(q_ok.size * n_pi),
        best_start=-1,
    )
