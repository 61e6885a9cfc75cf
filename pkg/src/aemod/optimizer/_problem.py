"""Linear structure of the max-min program and the LP subproblems built on it.

The customer margins are bilinear in ``(q, pi)``: ``m = pi.T @ (a + B q) - lambda_c``.
Freezing either block leaves a linear program, and a first-order expansion
around a point gives a trust-region LP for joint moves. All charging
constraints are linear in ``q`` alone, so every subproblem enforces them
exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from ..errors import NoFeasiblePointError
from ..zone_model import ZoneConfig, flow_matrices, fleet_rate_bound

IMPROVE_TOL = 1e-10
ROUND_SLACK = 1e-10
_LP_OPTIONS = {"presolve": True, "primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


@dataclass
class LPPoint:
    q: np.ndarray
    pi: np.ndarray
    objective: float
    r: float  # LP value of the epigraph variable


class Problem:
    """Precomputed arrays for one zone and one strictness slack."""

    def __init__(self, cfg: ZoneConfig, eps: float):
        self.cfg = cfg
        self.n = n = cfg.n
        self.eps = eps
        self.p = np.asarray(cfg.p)
        self.lam_c = np.asarray(cfg.lambda_c)
        self.offset, self.slope = flow_matrices(cfg)
        self.rows, self.cols = np.tril_indices(n)
        self.m = self.rows.size
        self.bound = fleet_rate_bound(cfg)
        # keep LP vertices a hair inside the strict limits so they survive roundoff
        self.partial_rhs = cfg.partial_capacity - eps - ROUND_SLACK * max(1.0, cfg.partial_capacity)
        self.full_rhs = cfg.mu_c - eps - ROUND_SLACK * max(1.0, cfg.mu_c)
        self.lv_p = cfg.lambda_v * self.p
        # row-sum equality rows over the tril entries
        self.row_sum = np.zeros((n, self.m))
        self.row_sum[self.rows, np.arange(self.m)] = 1.0

    # -- evaluation -------------------------------------------------------

    def class_rates(self, q: np.ndarray) -> np.ndarray:
        return self.offset + self.slope @ q

    def margins(self, q: np.ndarray, pi: np.ndarray) -> np.ndarray:
        return pi.T @ self.class_rates(q) - self.lam_c

    def objective(self, q: np.ndarray, pi: np.ndarray) -> float:
        return float(np.min(self.margins(q, pi)))

    def partial_load(self, q: np.ndarray) -> float:
        return float(np.sum(self.lv_p * (1.0 - q)))

    def charging_ok(self, q: np.ndarray, tol: float = 0.0) -> bool:
        return (
            self.partial_load(q) <= self.partial_rhs + tol
            and self.lv_p[0] * q[0] <= self.full_rhs + tol
        )

    # -- feasibility restoration -------------------------------------------

    def q0_cap(self) -> float:
        if self.lv_p[0] <= 0.0:
            return 1.0
        return min(1.0, self.full_rhs / self.lv_p[0])

    def min_partial_load(self) -> float:
        """Smallest partial-charging flow any admissible ``q`` can produce."""
        return float(self.lv_p[0] * (1.0 - self.q0_cap()))

    def require_charging_feasible(self) -> None:
        cfg = self.cfg
        if self.full_rhs < 0.0:
            raise NoFeasiblePointError(
                f"full-charging station: mu_c={cfg.mu_c} does not exceed the slack {self.eps}",
                constraint="full_station",
            )
        floor = self.min_partial_load()
        if floor > self.partial_rhs:
            raise NoFeasiblePointError(
                "partial-charging points: depleted-vehicle flow that cannot go to the full station "
                f"({floor:.6g}/min) exceeds capacity C*n*mu_c - eps = {self.partial_rhs:.6g}/min",
                constraint="partial_charging",
            )

    def restore(self, q: np.ndarray) -> np.ndarray:
        """Move ``q`` into the charging-feasible set by shrinking charging flows.

        The full-station flow is capped first; if the partial-charging flow is
        still too large, every class's partial flow is scaled down by a common
        factor, keeping the unavoidable depleted-vehicle share.
        """
        self.require_charging_feasible()
        q = np.clip(np.asarray(q, dtype=float), 0.0, 1.0).copy()
        cap0 = self.q0_cap()
        if q[0] > cap0:
            q[0] = cap0
        flows = self.lv_p * (1.0 - q)
        total = float(flows.sum())
        target = self.partial_rhs * (1.0 - 1e-12)
        if total > target:
            floor = np.zeros_like(flows)
            floor[0] = self.min_partial_load()
            excess = total - floor.sum()
            s = (target - floor.sum()) / excess if excess > 0 else 0.0
            s = min(max(s, 0.0), 1.0)
            new = floor + s * (flows - floor)
            with np.errstate(divide="ignore", invalid="ignore"):
                q = np.where(self.lv_p > 0, 1.0 - new / np.where(self.lv_p > 0, self.lv_p, 1.0), q)
            q = np.clip(q, 0.0, 1.0)
            q[0] = min(q[0], cap0)
        return q

    # -- LP subproblems ------------------------------------------------------

    def lp_step(
        self,
        q: np.ndarray,
        pi: np.ndarray,
        free_q: bool = True,
        free_pi: bool = True,
        delta: float = math.inf,
        q_fixed: np.ndarray | None = None,
    ) -> LPPoint | None:
        """Maximize the linearized minimum margin around ``(q, pi)``.

        With one block frozen the linearization is exact and the step is the
        global optimum of that block. ``q_fixed`` is a boolean mask of charging
        decisions that must not move.
        """
        n, m = self.n, self.m
        lv = self.class_rates(q)
        marg = pi.T @ lv - self.lam_c
        nv = n + m + 1
        # margin_i >= R  ->  R - G dq - H dpi <= marg_i
        A = np.zeros((n + 2, nv))
        b = np.zeros(n + 2)
        A[:n, :n] = -(pi.T @ self.slope)
        A[self.cols, n + np.arange(m)] = -lv[self.rows]
        A[:n, -1] = 1.0
        b[:n] = marg
        A[n, :n] = -self.lv_p
        b[n] = self.partial_rhs - self.partial_load(q)
        A[n + 1, 0] = self.lv_p[0]
        b[n + 1] = self.full_rhs - self.lv_p[0] * q[0]
        A_eq = np.zeros((n, nv))
        A_eq[:, n : n + m] = self.row_sum
        b_eq = np.zeros(n)

        bounds = []
        for i in range(n):
            if not free_q or (q_fixed is not None and q_fixed[i]):
                bounds.append((0.0, 0.0))
            else:
                bounds.append((max(-delta, -q[i]), min(delta, 1.0 - q[i])))
        pv = pi[self.rows, self.cols]
        for e in range(m):
            if not free_pi:
                bounds.append((0.0, 0.0))
            else:
                bounds.append((max(-delta, -pv[e]), min(delta, 1.0 - pv[e])))
        bounds.append((None, None))
        c = np.zeros(nv)
        c[-1] = -1.0
        # b may be a hair negative from round-off at a feasible point
        b[n:] = np.maximum(b[n:], -1e-13)
        res = linprog(c, A_ub=A, b_ub=b, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs", options=_LP_OPTIONS)
        if res.status != 0:
            return None
        x = res.x
        q_new = np.clip(q + x[:n], 0.0, 1.0)
        pi_new = pi.copy()
        pi_new[self.rows, self.cols] = np.clip(pv + x[n : n + m], 0.0, 1.0)
        pi_new /= pi_new.sum(axis=1, keepdims=True)
        if not self.charging_ok(q_new, tol=1e-9):
            q_new = self.restore(q_new)
        return LPPoint(q_new, pi_new, self.objective(q_new, pi_new), float(x[-1]))

    def lifted_lp(
        self,
        r_fixed: float | None = None,
        q_pins: dict[int, float] | None = None,
        pi_pins: dict[tuple[int, int], float] | None = None,
        active_margins: frozenset[int] = frozenset(),
        partial_active: bool = False,
        full_strict: bool = True,
    ) -> LPPoint | None:
        """Solve the program in flow variables ``x_kj = lambda_v_class_k * pi_kj``.

        In these variables every constraint is linear, so the LP optimum is the
        global optimum of the (optionally restricted) problem. Indices in
        ``pi_pins`` are 0-based ``(row, col)``; ``active_margins`` holds 0-based
        classes whose margin must equal ``R``.
        """
        n, m = self.n, self.m
        q_pins = q_pins or {}
        pi_pins = pi_pins or {}
        nv = n + m + 1
        ub_rows, ub_rhs, eq_rows, eq_rhs = [], [], [], []
        for i in range(n):
            row = np.zeros(nv)
            row[n + np.flatnonzero(self.cols == i)] = -1.0
            row[-1] = 1.0
            if i in active_margins:
                eq_rows.append(row)
                eq_rhs.append(-self.lam_c[i])
            else:
                ub_rows.append(row)
                ub_rhs.append(-self.lam_c[i])
        for k in range(n):
            row = np.zeros(nv)
            row[:n] = -self.slope[k]
            row[n + np.flatnonzero(self.rows == k)] = 1.0
            eq_rows.append(row)
            eq_rhs.append(self.offset[k])
        row = np.zeros(nv)
        row[:n] = -self.lv_p
        rhs = self.partial_rhs - float(self.lv_p.sum())
        if partial_active:
            eq_rows.append(row)
            eq_rhs.append(rhs)
        else:
            ub_rows.append(row)
            ub_rhs.append(rhs)
        row = np.zeros(nv)
        row[0] = self.lv_p[0]
        ub_rows.append(row)
        ub_rhs.append(self.full_rhs if full_strict else self.cfg.mu_c)

        bounds: list[tuple] = [(0.0, 1.0)] * n + [(0.0, None)] * m + [(None, None)]
        for i, v in q_pins.items():
            bounds[i] = (v, v)
        for (k, j), v in pi_pins.items():
            if v == 0.0:
                e = self._entry(k, j)
                bounds[n + e] = (0.0, 0.0)
            else:  # pinned to one: the rest of row k carries no flow
                for e in np.flatnonzero(self.rows == k):
                    if self.cols[e] != j:
                        bounds[n + e] = (0.0, 0.0)
        if r_fixed is not None:
            bounds[-1] = (r_fixed, r_fixed)
        c = np.zeros(nv)
        c[-1] = -1.0
        res = linprog(
            c,
            A_ub=np.array(ub_rows),
            b_ub=np.array(ub_rhs),
            A_eq=np.array(eq_rows),
            b_eq=np.array(eq_rhs),
            bounds=bounds,
            method="highs",
            options=_LP_OPTIONS,
        )
        if res.status != 0:
            return None
        q = np.clip(res.x[:n], 0.0, 1.0)
        for i, v in q_pins.items():
            q[i] = v
        x = np.maximum(res.x[n : n + m], 0.0)
        pi = np.zeros((n, n))
        pi[self.rows, self.cols] = x
        sums = pi.sum(axis=1)
        for k in range(n):
            if sums[k] > 1e-12:
                pi[k] /= sums[k]
            else:  # row carries no vehicles; any distribution is optimal
                pi[k] = 0.0
                pinned_one = [j for (kk, j), v in pi_pins.items() if kk == k and v == 1.0]
                pi[k, pinned_one[0] if pinned_one else k] = 1.0
        return LPPoint(q, pi, self.objective(q, pi), float(res.x[-1]))

    def _entry(self, k: int, j: int) -> int:
        return int(np.flatnonzero((self.rows == k) & (self.cols == j))[0])
