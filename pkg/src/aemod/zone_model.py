"""Single-zone flow and stability model.

Indexing follows the model's own notation: ``p`` and ``q`` are indexed by
vehicle SoC class on arrival, ``0..n-1``. Customer classes, service-ready
vehicle classes and dispatch-matrix rows are ``1..n`` and are stored at
array position ``class - 1``. ``pi[k-1, j-1]`` is the probability that a
service-ready class-k vehicle serves sub-class j (zero for ``j > k``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, InstabilityError

SUM_TOL = 1e-9
DEFAULT_EPS = 1e-6
TIE_RTOL = 1e-9


def _as_float_tuple(values, name: str) -> tuple[float, ...]:
    try:
        out = tuple(float(v) for v in values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"expected a list of numbers ({exc})", field=name) from None
    if not all(math.isfinite(v) for v in out):
        raise ConfigError("values must be finite", field=name)
    return out


@dataclass(frozen=True)
class ZoneConfig:
    """Exogenous parameters of one service zone (rates in 1/min)."""

    n: int
    lambda_v: float
    p: tuple[float, ...]
    lambda_c: tuple[float, ...]
    mu_c: float
    c_points: int

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 2:
            raise ConfigError("number of classes must be an integer >= 2", field="n")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "p", _as_float_tuple(self.p, "p"))
        object.__setattr__(self, "lambda_c", _as_float_tuple(self.lambda_c, "lambda_c"))
        if len(self.p) != self.n:
            raise ConfigError(f"expected {self.n} entries, got {len(self.p)}", field="p")
        if len(self.lambda_c) != self.n:
            raise ConfigError(f"expected {self.n} entries, got {len(self.lambda_c)}", field="lambda_c")
        if any(v < 0.0 or v > 1.0 for v in self.p):
            raise ConfigError("probabilities must lie in [0, 1]", field="p")
        if abs(math.fsum(self.p) - 1.0) > SUM_TOL:
            raise ConfigError(f"probabilities must sum to 1 (got {math.fsum(self.p)!r})", field="p")
        if any(v <= 0.0 for v in self.lambda_c):
            raise ConfigError("every class needs a positive customer rate", field="lambda_c")
        if not (math.isfinite(self.lambda_v) and self.lambda_v > 0):
            raise ConfigError("must be positive", field="lambda_v")
        if not (math.isfinite(self.mu_c) and self.mu_c > 0):
            raise ConfigError("must be positive", field="mu_c")
        if isinstance(self.c_points, bool) or int(self.c_points) != self.c_points or self.c_points < 1:
            raise ConfigError("must be a positive integer", field="c_points")
        object.__setattr__(self, "lambda_v", float(self.lambda_v))
        object.__setattr__(self, "mu_c", float(self.mu_c))
        object.__setattr__(self, "c_points", int(self.c_points))

    @property
    def total_demand(self) -> float:
        return math.fsum(self.lambda_c)

    @property
    def partial_capacity(self) -> float:
        """Service capacity of the partial-charging points, ``C * n * mu_c``."""
        return self.c_points * self.n * self.mu_c

    def replace(self, **changes) -> "ZoneConfig":
        data = {
            "n": self.n,
            "lambda_v": self.lambda_v,
            "p": self.p,
            "lambda_c": self.lambda_c,
            "mu_c": self.mu_c,
            "c_points": self.c_points,
        }
        data.update(changes)
        return ZoneConfig(**data)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "lambda_v": self.lambda_v,
            "p": list(self.p),
            "lambda_c": list(self.lambda_c),
            "mu_c": self.mu_c,
            "c_points": self.c_points,
        }


@dataclass(frozen=True, eq=False)
class DecisionSet:
    """Charging vector ``q`` and lower-triangular dispatch matrix ``pi``.

    Arrays are copied and made read-only on construction.
    """

    q: np.ndarray
    pi: np.ndarray

    def __post_init__(self):
        q = np.array(self.q, dtype=float)
        pi = np.array(self.pi, dtype=float)
        if q.ndim != 1:
            raise ConfigError("must be a vector", field="q")
        n = q.shape[0]
        if pi.shape != (n, n):
            raise ConfigError(f"must be a {n}x{n} matrix", field="pi")
        if not np.all(np.isfinite(q)) or not np.all(np.isfinite(pi)):
            raise ConfigError("decision values must be finite", field="q" if not np.all(np.isfinite(q)) else "pi")
        if np.any(q < 0.0) or np.any(q > 1.0):
            raise ConfigError("probabilities must lie in [0, 1]", field="q")
        if np.any(pi < 0.0) or np.any(pi > 1.0):
            raise ConfigError("probabilities must lie in [0, 1]", field="pi")
        if np.any(np.triu(pi, k=1) != 0.0):
            raise ConfigError("entries above the diagonal must be zero", field="pi")
        rows = pi.sum(axis=1)
        bad = np.flatnonzero(np.abs(rows - 1.0) > SUM_TOL)
        if bad.size:
            raise ConfigError(f"row {bad[0] + 1} sums to {rows[bad[0]]!r}, not 1", field="pi")
        q.setflags(write=False)
        pi.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "pi", pi)

    @property
    def n(self) -> int:
        return self.q.shape[0]

    @classmethod
    def same_class(cls, q: Sequence[float]) -> "DecisionSet":
        q = np.asarray(q, dtype=float)
        return cls(q, np.eye(q.shape[0]))

    @classmethod
    def from_arrays(cls, q, pi) -> "DecisionSet":
        """Build from solver output, absorbing round-off below ``SUM_TOL``."""
        q = np.clip(np.asarray(q, dtype=float), 0.0, 1.0)
        pi = np.tril(np.clip(np.asarray(pi, dtype=float), 0.0, 1.0))
        pi = pi / pi.sum(axis=1, keepdims=True)
        return cls(q, pi)

    def allclose(self, other: "DecisionSet", atol: float = 1e-12) -> bool:
        return (
            self.n == other.n
            and np.allclose(self.q, other.q, rtol=0.0, atol=atol)
            and np.allclose(self.pi, other.pi, rtol=0.0, atol=atol)
        )

    def to_dict(self) -> dict:
        return {
            "q": self.q.tolist(),
            "pi": [row[: i + 1].tolist() for i, row in enumerate(self.pi)],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DecisionSet":
        """Inverse of :meth:`to_dict`; ``pi`` may be ragged (row i has i entries)."""
        q = np.asarray(data["q"], dtype=float)
        n = q.shape[0]
        pi = np.zeros((n, n))
        rows = data["pi"]
        if len(rows) != n:
            raise ConfigError(f"expected {n} rows", field="pi")
        for i, row in enumerate(rows):
            row = list(row)
            if len(row) == n:
                pi[i] = row
            elif len(row) == i + 1:
                pi[i, : i + 1] = row
            else:
                raise ConfigError(f"row {i + 1} must have {i + 1} or {n} entries", field="pi")
        return cls(q, pi)


@dataclass(frozen=True)
class RateProfile:
    lambda_v_class: tuple[float, ...]
    lambda_vs: tuple[float, ...]
    margins: tuple[float, ...]


@dataclass(frozen=True)
class StabilityReport:
    per_class_stable: tuple[bool, ...]
    response_limit_met: tuple[bool, ...]
    partial_charging_stable: bool
    full_station_stable: bool
    lemma1_bound: float
    margins: tuple[float, ...] = field(default=())
    partial_charging_load: float = 0.0
    full_station_load: float = 0.0

    @property
    def stable(self) -> bool:
        """All customer queues and both charging queues stable."""
        return all(self.per_class_stable) and self.partial_charging_stable and self.full_station_stable

    @property
    def binding_charging_constraint(self) -> str | None:
        if not self.partial_charging_stable:
            return "partial_charging"
        if not self.full_station_stable:
            return "full_station"
        return None


@dataclass(frozen=True)
class ResponseTimes:
    per_class: tuple[float, ...]
    max: float
    argmax_class: int  # 1-based; lowest index on ties


def _check_dims(cfg: ZoneConfig, d: DecisionSet) -> None:
    if d.n != cfg.n:
        raise ConfigError(f"decision set has {d.n} classes, zone has {cfg.n}", field="n")


def flow_matrices(cfg: ZoneConfig) -> tuple[np.ndarray, np.ndarray]:
    """Affine map ``lambda_v_class = offset + slope @ q``.

    The columns of ``slope`` sum to zero, which is the flow-conservation
    identity in matrix form.
    """
    n = cfg.n
    p = np.asarray(cfg.p)
    lv = cfg.lambda_v
    offset = np.empty(n)
    slope = np.zeros((n, n))
    for k in range(1, n):  # class k <- partial charge from k-1, or class k serving directly
        offset[k - 1] = lv * p[k - 1]
        slope[k - 1, k - 1] -= lv * p[k - 1]
        slope[k - 1, k] += lv * p[k]
    offset[n - 1] = lv * p[n - 1]
    slope[n - 1, n - 1] -= lv * p[n - 1]
    slope[n - 1, 0] += lv * p[0]
    return offset, slope


def _class_rates(cfg: ZoneConfig, q: np.ndarray) -> np.ndarray:
    p = np.asarray(cfg.p)
    n = cfg.n
    out = np.empty(n)
    out[: n - 1] = p[: n - 1] * (1.0 - q[: n - 1]) + p[1:] * q[1:]
    out[n - 1] = p[n - 1] * (1.0 - q[n - 1]) + p[0] * q[0]
    return cfg.lambda_v * out


def vehicle_class_rates(cfg: ZoneConfig, d: DecisionSet) -> np.ndarray:
    """Rate of service-ready vehicles per class ``1..n``."""
    _check_dims(cfg, d)
    return _class_rates(cfg, d.q)


def effective_service_rates(cfg: ZoneConfig, d: DecisionSet) -> RateProfile:
    _check_dims(cfg, d)
    lv = _class_rates(cfg, d.q)
    lvs = d.pi.T @ lv
    margins = lvs - np.asarray(cfg.lambda_c)
    return RateProfile(tuple(lv.tolist()), tuple(lvs.tolist()), tuple(margins.tolist()))


def margins(cfg: ZoneConfig, d: DecisionSet) -> np.ndarray:
    _check_dims(cfg, d)
    return d.pi.T @ _class_rates(cfg, d.q) - np.asarray(cfg.lambda_c)


def partial_charging_load(cfg: ZoneConfig, q) -> float:
    """Arrival rate into the partial-charging points."""
    p = np.asarray(cfg.p)
    return float(cfg.lambda_v * np.sum(p * (1.0 - np.asarray(q))))


def full_station_load(cfg: ZoneConfig, q) -> float:
    return float(cfg.lambda_v * cfg.p[0] * q[0])


def fleet_rate_bound(cfg: ZoneConfig) -> float:
    """Largest common margin any decision can achieve: ``(lambda_v - sum lambda_c) / n``.

    A nonpositive value means no decision makes every customer queue stable.
    """
    return (cfg.lambda_v - cfg.total_demand) / cfg.n


def check_stability(cfg: ZoneConfig, d: DecisionSet, r: float = 0.0, eps: float = DEFAULT_EPS) -> StabilityReport:
    """Evaluate customer-queue, response-limit and charging-queue conditions.

    Strict inequalities are tested as ``lhs <= rhs - eps`` and also ``lhs < rhs``,
    so a boundary point is unstable even with ``eps = 0``.
    """
    if r < 0:
        raise ConfigError("response-rate limit must be nonnegative", field="r")
    m = margins(cfg, d)
    partial = partial_charging_load(cfg, d.q)
    full = full_station_load(cfg, d.q)
    return StabilityReport(
        per_class_stable=tuple(bool(v > 0.0 and v >= eps) for v in m),
        response_limit_met=tuple(bool(v >= r) for v in m),
        partial_charging_stable=bool(partial < cfg.partial_capacity and partial <= cfg.partial_capacity - eps),
        full_station_stable=bool(full < cfg.mu_c and full <= cfg.mu_c - eps),
        lemma1_bound=fleet_rate_bound(cfg),
        margins=tuple(m.tolist()),
        partial_charging_load=partial,
        full_station_load=full,
    )


def analytic_response_times(cfg: ZoneConfig, d: DecisionSet) -> ResponseTimes:
    """Mean M/M/1 response time ``1 / (lambda_vs - lambda_c)`` for each class."""
    m = margins(cfg, d)
    bad = np.flatnonzero(m <= 0.0)
    if bad.size:
        k = int(bad[0]) + 1
        raise InstabilityError(f"class {k} is unstable (margin {m[bad[0]]!r} <= 0)", klass=k)
    times = 1.0 / m
    # classes within round-off of the worst count as tied; lowest index wins
    idx = int(np.flatnonzero(times >= times.max() * (1.0 - TIE_RTOL))[0])
    return ResponseTimes(tuple(times.tolist()), float(times[idx]), idx + 1)
