"""Multi-start local ascent for the max-min charging/dispatch program."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, InfeasibleZoneError
from ..zone_model import DecisionSet, ZoneConfig, check_stability, fleet_rate_bound, margins
from ._problem import IMPROVE_TOL, Problem

CEILING_TOL = 1e-9  # LP solutions are accurate to about this, relative


@dataclass(frozen=True)
class SolverConfig:
    starts: int = 64
    max_iters: int = 5000
    step_tol: float = 1e-8
    eps_strict: float = 1e-6
    seed: int = 0
    grid_steps: int = 101

    def __post_init__(self):
        for name in ("starts", "max_iters", "grid_steps"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v or v < 1:
                raise ConfigError("must be a positive integer", field=name)
        if self.grid_steps < 2:
            raise ConfigError("must be at least 2", field="grid_steps")
        for name in ("step_tol", "eps_strict"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ConfigError("must be positive", field=name)
        if int(self.seed) != self.seed:
            raise ConfigError("must be an integer", field="seed")


@dataclass(frozen=True, eq=False)
class SolveResult:
    decisions: DecisionSet
    r_star: float
    feasible: bool
    bound_gap: float
    starts_used: int
    iterations: int
    best_start: int = -1

    @property
    def max_response_time(self) -> float:
        return 1.0 / self.r_star if self.feasible and self.r_star > 0 else math.inf

    def to_dict(self) -> dict:
        return {
            "decisions": self.decisions.to_dict(),
            "r_star": self.r_star,
            "max_response_min": self.max_response_time,
            "feasible": self.feasible,
            "bound_gap": self.bound_gap,
            "starts_used": self.starts_used,
            "iterations": self.iterations,
            "best_start": self.best_start,
        }


def objective_min_margin(cfg: ZoneConfig, d: DecisionSet) -> float:
    """Smallest ``lambda_vs - lambda_c`` over classes; negative when some queue is unstable."""
    return float(np.min(margins(cfg, d)))


def is_feasible(cfg: ZoneConfig, d: DecisionSet, r: float, eps: float) -> bool:
    """All epigraph constraints with slack ``eps``: margins >= r >= eps, charging stable."""
    rep = check_stability(cfg, d, r=0.0, eps=eps)
    return (
        r >= eps
        and r <= fleet_rate_bound(cfg) + 1e-12
        and all(m >= r - 1e-12 for m in rep.margins)
        and rep.partial_charging_stable
        and rep.full_station_stable
    )


def _result(cfg: ZoneConfig, prob: Problem, q, pi, sc: SolverConfig, starts: int, iters: int, best: int) -> SolveResult:
    d = DecisionSet.from_arrays(q, pi)
    r = objective_min_margin(cfg, d)
    return SolveResult(
        decisions=d,
        r_star=r,
        feasible=is_feasible(cfg, d, r, sc.eps_strict),
        bound_gap=prob.bound - r,
        starts_used=starts,
        iterations=iters,
        best_start=best,
    )


def _project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, v.size + 1)
    rho = np.flatnonzero(u - css / ind > 0)[-1]
    return np.maximum(v - css[rho] / (rho + 1.0), 0.0)


def project_decisions(q, pi) -> tuple[np.ndarray, np.ndarray]:
    """Clip ``q`` to the unit box and project each dispatch row onto its simplex."""
    q = np.clip(np.asarray(q, dtype=float), 0.0, 1.0)
    pi = np.asarray(pi, dtype=float)
    n = q.shape[0]
    if pi.shape != (n, n):
        raise ConfigError(f"must be a {n}x{n} matrix", field="pi")
    out = np.zeros((n, n))
    for k in range(n):
        out[k, : k + 1] = _project_simplex(pi[k, : k + 1])
    return q, out


def ascend(
    prob: Problem,
    q: np.ndarray,
    pi: np.ndarray,
    sc: SolverConfig,
    free_pi: bool = True,
    q_fixed: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, float, int]:
    """Local ascent from a charging-feasible point.

    Alternates exact block LPs (charging block, dispatch block) until neither
    improves, then tries a joint trust-region LP step on the linearized
    margins. Only strict improvements are accepted, so a point that is
    already locally optimal is returned unchanged.
    """
    obj = prob.objective(q, pi)
    iters = 0
    delta = 0.5
    blocks = [(True, False)] + ([(False, True)] if free_pi else [])
    need_blocks = True
    while iters < sc.max_iters:
        if need_blocks:
            need_blocks = False
            improved = True
            while improved and iters < sc.max_iters:
                improved = False
                for fq, fp in blocks:
                    step = prob.lp_step(q, pi, fq, fp, q_fixed=q_fixed)
                    iters += 1
                    if step is not None and step.objective > obj + IMPROVE_TOL:
                        q, pi, obj = step.q, step.pi, step.objective
                        improved = True
            if not free_pi:
                break
            continue
        step = prob.lp_step(q, pi, True, True, delta=delta, q_fixed=q_fixed)
        iters += 1
        if step is not None and step.objective > obj + IMPROVE_TOL:
            move = max(float(np.max(np.abs(step.q - q))), float(np.max(np.abs(step.pi - pi))))
            q, pi, obj = step.q, step.pi, step.objective
            delta = min(1.0, 2.0 * delta)
            need_blocks = True
            if move < sc.step_tol:
                break
        else:
            delta *= 0.5
            if delta < sc.step_tol:
                break
    return q, pi, obj, iters


def _start_points(cfg: ZoneConfig, sc: SolverConfig, lifted):
    """Yield ``sc.starts`` starting points, built lazily so an early exit skips the rest."""
    from ..policies import fixed_baselines  # policies imports this module

    count = 0
    if lifted is not None:
        yield lifted.q, lifted.pi
        count += 1
    eye = np.eye(cfg.n)
    anchors = [lambda: (solve_charging_only(cfg, eye, sc).decisions.q.copy(), eye)]
    anchors += [lambda d=d: (d.q.copy(), d.pi.copy()) for d in fixed_baselines(cfg).values()]
    for make in anchors:
        if count >= sc.starts:
            return
        yield make()
        count += 1
    rng = np.random.default_rng(sc.seed)
    while count < sc.starts:
        yield _random_point(rng, cfg.n)
        count += 1


def _random_point(rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
    q = rng.random(n)
    pi = np.zeros((n, n))
    for k in range(n):
        pi[k, : k + 1] = rng.dirichlet(np.ones(k + 1))
    return q, pi


def solve(cfg: ZoneConfig, sc: SolverConfig | None = None) -> SolveResult:
    """Maximize the minimum customer margin over charging and dispatch decisions.

    Starts: the optimum of the lifted flow-variable LP, the
    charging-optimized same-class policy, the four fixed baselines, then
    uniform random points until ``sc.starts`` is reached. The best start wins; ties go to the
    lower start index. The loop stops early once a start reaches the value of
    the lifted LP, which no decision can exceed.
    """
    sc = sc or SolverConfig()
    bound = fleet_rate_bound(cfg)
    if bound <= 0:
        raise InfeasibleZoneError(
            f"fleet rate {cfg.lambda_v} does not exceed total demand {cfg.total_demand}; "
            f"margin bound is {bound:.6g}"
        )
    prob = Problem(cfg, sc.eps_strict)
    prob.require_charging_feasible()
    lifted = prob.lifted_lp()
    ceiling = bound if lifted is None else min(bound, lifted.r)

    best = None
    total_iters = 0
    used = 0
    for idx, (q0, pi0) in enumerate(_start_points(cfg, sc, lifted)):
        used = idx + 1
        q, pi = project_decisions(q0, pi0)
        q = prob.restore(q)
        q, pi, obj, iters = ascend(prob, q, pi, sc)
        total_iters += iters
        if best is None or obj > best[2]:
            best = (q, pi, obj, idx)
        if best[2] >= ceiling - CEILING_TOL * max(1.0, abs(ceiling)):
            break
    return _result(cfg, prob, best[0], best[1], sc, used, total_iters, best[3])


def solve_charging_only(cfg: ZoneConfig, pi, sc: SolverConfig | None = None) -> SolveResult:
    """Optimal charging vector for a fixed dispatch matrix (a single exact LP)."""
    sc = sc or SolverConfig()
    if fleet_rate_bound(cfg) <= 0:
        raise InfeasibleZoneError(f"fleet rate {cfg.lambda_v} does not exceed total demand {cfg.total_demand}")
    pi = DecisionSet(np.zeros(cfg.n), pi).pi.copy()
    prob = Problem(cfg, sc.eps_strict)
    prob.require_charging_feasible()
    q = prob.restore(np.zeros(cfg.n))
    q, pi, _, iters = ascend(prob, q, pi, sc, free_pi=False)
    return _result(cfg, prob, q, pi, sc, 1, iters, 0)


def suggest_and_improve(cfg: ZoneConfig, candidate, sc: SolverConfig | None = None) -> SolveResult:
    """Repair a possibly infeasible candidate, then locally improve it.

    ``candidate`` is a :class:`DecisionSet` or a ``(q, pi)`` pair of raw
    arrays. Repair projects onto the box and dispatch simplices, then shrinks
    charging flows until the charging queues are stable with slack. Raises
    :class:`NoFeasiblePointError` when no charging vector is stable.
    """
    sc = sc or SolverConfig()
    if isinstance(candidate, DecisionSet):
        q, pi = candidate.q, candidate.pi
    else:
        q, pi = candidate
    q = np.asarray(q, dtype=float)
    if q.shape != (cfg.n,):
        raise ConfigError(f"expected {cfg.n} charging decisions", field="q")
    prob = Problem(cfg, sc.eps_strict)
    prob.require_charging_feasible()
    q, pi = project_decisions(q, pi)
    q = prob.restore(q)
    q, pi, _, iters = ascend(prob, q, pi, sc)
    return _result(cfg, prob, q, pi, sc, 1, iters, 0)
