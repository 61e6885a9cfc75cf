"""Closed-form branch candidates from the KKT case analysis.

A hypothesis is a set of multiplier names assumed nonzero. Each name pins
part of the solution:

==============  ==============================================
``gamma_n``     R equals the fleet bound ``(lambda_v - sum lambda_c) / n``
``omega_n``     R equals ``eps``
``gamma_i``     ``q_i = 1``          (``i`` in ``0..n-1``)
``omega_i``     ``q_i = 0``
``beta_1``      ``q_0 = mu_c / (lambda_v p_0)`` (full station saturated)
``beta_0``      partial-charging points saturated
``alpha_i``     customer constraint of class ``i`` active (``1..n``)
``nu_k_j``      ``pi_kj = 1``
``mu_k_j``      ``pi_kj = 0``
==============  ==============================================

Variables left unpinned are resolved numerically by the flow-variable LP
restricted to the hypothesis. Active customer constraints then fix one
charging decision each through the linear root of that class's margin;
for class n this is the closed form in ``q_0`` given ``q_{n-1}``,
``pi_nn`` and R.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, EnumerationTooLargeError
from ..zone_model import DecisionSet, ZoneConfig
from ._problem import LPPoint, Problem
from .kkt import KKTCertificate, certify
from .search import SolverConfig, is_feasible, objective_min_margin

MAX_ENUM_N = 4
_NAME = re.compile(r"^(alpha|beta|gamma|omega)_(\d+|n)$|^(nu|mu)_(\d+)_(\d+)$")


@dataclass(frozen=True, eq=False)
class BranchCandidate:
    hypothesis: frozenset
    decisions: DecisionSet
    r: float  # R value dictated by the branch (may exceed what the decisions achieve)
    objective: float
    feasible: bool
    certificate: KKTCertificate | None = None
    dominated: bool = False


def normalize_hypothesis(names, n: int) -> frozenset:
    out = set()
    for raw in names:
        name = str(raw).strip()
        mt = _NAME.match(name)
        if not mt:
            raise ConfigError(f"unknown multiplier name {name!r}", field="active_set")
        if mt.group(1):
            kind, idx = mt.group(1), mt.group(2)
            if idx == "n":
                if kind not in ("gamma", "omega"):
                    raise ConfigError(f"{name!r}: only gamma_n/omega_n use the 'n' index", field="active_set")
                out.add(f"{kind}_n")
                continue
            i = int(idx)
            if kind in ("gamma", "omega"):
                if i == n:
                    out.add(f"{kind}_n")
                    continue
                if i >= n:
                    raise ConfigError(f"{name!r}: index out of range", field="active_set")
            elif kind == "alpha" and not 1 <= i <= n:
                raise ConfigError(f"{name!r}: index out of range", field="active_set")
            elif kind == "beta" and i not in (0, 1):
                raise ConfigError(f"{name!r}: index out of range", field="active_set")
            out.add(f"{kind}_{i}")
        else:
            k, j = int(mt.group(4)), int(mt.group(5))
            if not 1 <= j <= k <= n:
                raise ConfigError(f"{name!r}: needs 1 <= j <= k <= n", field="active_set")
            out.add(f"{mt.group(3)}_{k}_{j}")
    return frozenset(out)


def multiplier_names(n: int) -> list[str]:
    names = ["gamma_n", "omega_n", "beta_0", "beta_1"]
    names += [f"alpha_{i}" for i in range(1, n + 1)]
    names += [f"{kind}_{i}" for i in range(n) for kind in ("gamma", "omega")]
    names += [f"{kind}_{k}_{j}" for k in range(1, n + 1) for j in range(1, k + 1) for kind in ("nu", "mu")]
    return names


def default_hypotheses(n: int, max_size: int = 1) -> list[frozenset]:
    """All active sets of up to ``max_size`` names, each also combined with ``gamma_n``."""
    names = multiplier_names(n)
    out: list[frozenset] = [frozenset()]
    seen = {frozenset()}
    for size in range(1, max_size + 1):
        for combo in itertools.combinations(names, size):
            for extra in ((), ("gamma_n",)):
                h = frozenset(combo + extra)
                if h not in seen:
                    seen.add(h)
                    out.append(h)
    return out


def _pins(h: frozenset, prob: Problem):
    """Translate a hypothesis into LP pins; ``None`` when it contradicts itself."""
    cfg = prob.cfg
    r_fixed = None
    q_pins: dict[int, float] = {}
    pi_pins: dict[tuple[int, int], float] = {}
    active: set[int] = set()
    partial = False
    full_strict = True
    if "gamma_n" in h and "omega_n" in h:
        return None
    if "gamma_n" in h:
        r_fixed = prob.bound
    elif "omega_n" in h:
        r_fixed = prob.eps

    def pin_q(i, v):
        if i in q_pins and abs(q_pins[i] - v) > 1e-15:
            return False
        q_pins[i] = v
        return True

    for name in sorted(h):
        parts = name.split("_")
        kind = parts[0]
        if kind in ("gamma", "omega") and parts[1] != "n":
            if not pin_q(int(parts[1]), 1.0 if kind == "gamma" else 0.0):
                return None
        elif kind == "beta" and parts[1] == "1":
            if cfg.p[0] <= 0:
                return None
            full_strict = False
            if not pin_q(0, min(1.0, cfg.mu_c / (cfg.lambda_v * cfg.p[0]))):
                return None
        elif kind == "beta":
            partial = True
        elif kind == "alpha":
            active.add(int(parts[1]) - 1)
        elif kind in ("nu", "mu"):
            key = (int(parts[1]) - 1, int(parts[2]) - 1)
            v = 1.0 if kind == "nu" else 0.0
            if pi_pins.get(key, v) != v:
                return None
            pi_pins[key] = v
    ones = {}
    for (k, j), v in pi_pins.items():
        if v == 1.0:
            if k in ones:
                return None
            ones[k] = j
    for (k, j), v in pi_pins.items():
        if v == 0.0 and ones.get(k) == j:
            return None
    return dict(
        r_fixed=r_fixed,
        q_pins=q_pins,
        pi_pins=pi_pins,
        active_margins=frozenset(active),
        partial_active=partial,
        full_strict=full_strict,
    )


def _apply_active_roots(prob: Problem, q: np.ndarray, pi: np.ndarray, r: float, h: frozenset, pinned: dict):
    """Set each charging decision fixed by an active customer constraint.

    Class n's margin is linear in ``q_0``; class i < n's margin is linear in
    ``q_i``. Returns ``None`` when the coefficient vanishes (the branch is
    undefined there).
    """
    cfg = prob.cfg
    n = cfg.n
    lv, p = cfg.lambda_v, prob.p
    q = q.copy()
    for name in sorted(h):
        if not name.startswith("alpha_"):
            continue
        i = int(name.split("_")[1])
        if i == n:
            var = 0
            den = lv * p[0] * pi[n - 1, n - 1]
            if abs(den) < 1e-12:
                return None
            if var in pinned:
                continue
            q[0] = (cfg.lambda_c[n - 1] + lv * p[n - 1] * q[n - 1] * pi[n - 1, n - 1]
                    - lv * p[n - 1] * pi[n - 1, n - 1] + r) / den
        else:
            var = i
            den = lv * p[i] * (pi[i - 1, i - 1] - pi[i, i - 1])
            if abs(den) < 1e-12:
                return None
            if var in pinned:
                continue
            marg = prob.margins(q, pi)[i - 1]
            q[i] = q[i] + (r - marg) / den
        q[var] = min(max(q[var], 0.0), 1.0)
    return q


def _branch(prob: Problem, h: frozenset, sc: SolverConfig, with_certificate: bool) -> BranchCandidate | None:
    spec = _pins(h, prob)
    if spec is None:
        return None
    sol: LPPoint | None = prob.lifted_lp(**spec)
    r_branch = spec["r_fixed"]
    if sol is None and r_branch is not None:
        relaxed = dict(spec, r_fixed=None)
        sol = prob.lifted_lp(**relaxed)
    if sol is None:
        return None
    r = r_branch if r_branch is not None else sol.r
    q = _apply_active_roots(prob, sol.q, sol.pi, r, h, spec["q_pins"])
    if q is None:
        return None
    cfg = prob.cfg
    d = DecisionSet.from_arrays(q, sol.pi)
    obj = objective_min_margin(cfg, d)
    feasible = is_feasible(cfg, d, min(r, obj), sc.eps_strict) and obj >= r - 1e-9
    cert = certify(cfg, d, r=min(r, obj), eps=sc.eps_strict) if with_certificate else None
    return BranchCandidate(h, d, float(r), obj, feasible, cert)


def theorem1_branch_candidates(
    cfg: ZoneConfig,
    active_set=None,
    sc: SolverConfig | None = None,
    max_hypotheses: int = 256,
    max_size: int = 1,
    with_certificate: bool = True,
) -> list[BranchCandidate]:
    """Candidates for one explicit hypothesis, or for an enumeration of small ones.

    ``active_set`` is an iterable of multiplier names, or a list of such
    iterables. With ``None``, every active set of up to ``max_size`` names is
    tried (``n <= 4`` only). Contradictory or LP-infeasible hypotheses produce
    no candidate. A candidate is marked dominated when its branch R falls
    below the best objective among feasible candidates, or below what its own
    decisions achieve.
    """
    sc = sc or SolverConfig()
    prob = Problem(cfg, sc.eps_strict)
    if active_set is None:
        if cfg.n > MAX_ENUM_N:
            raise EnumerationTooLargeError(f"enumeration needs n <= {MAX_ENUM_N}, got n={cfg.n}; pass active_set")
        hyps = default_hypotheses(cfg.n, max_size)
    elif active_set and not isinstance(active_set, str) and all(
        not isinstance(h, str) for h in active_set
    ):
        hyps = [normalize_hypothesis(h, cfg.n) for h in active_set]
    else:
        hyps = [normalize_hypothesis([active_set] if isinstance(active_set, str) else active_set, cfg.n)]
    if len(hyps) > max_hypotheses:
        raise EnumerationTooLargeError(f"{len(hyps)} hypotheses exceed the cap of {max_hypotheses}")

    out = [c for c in (_branch(prob, h, sc, with_certificate) for h in hyps) if c is not None]
    best = max((c.objective for c in out if c.feasible), default=-np.inf)
    return [
        BranchCandidate(
            c.hypothesis, c.decisions, c.r, c.objective, c.feasible, c.certificate,
            dominated=bool(c.r < best - 1e-9 or c.r < c.objective - 1e-9),
        )
        for c in out
    ]


def bound_branch_point(prob: Problem) -> LPPoint | None:
    """Decisions for the fleet-bound branch, or the best reachable point if the bound is not attainable."""
    sol = prob.lifted_lp(r_fixed=prob.bound)
    if sol is None:
        sol = prob.lifted_lp()
    return sol
