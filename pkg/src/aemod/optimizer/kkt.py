"""Lagrangian, stationarity gradient and KKT residuals for the epigraph program.

Multiplier roles:

* ``alpha[i]``  customer constraint ``margin_i >= R`` (class i+1)
* ``beta[0]``   partial-charging capacity, ``beta[1]`` full-station capacity
* ``gamma[i]``, ``omega[i]`` upper/lower bound on ``q_i`` for ``i < n``;
  index ``n`` is the upper (fleet bound) / lower (``eps``) bound on ``R``
* ``nu``, ``mu`` upper/lower bounds on each dispatch entry (lower triangle)
* ``delta[k]``  row-sum equality of dispatch row k+1 (free sign)

The strictness slack maps to the constraints as: ``eps0`` partial charging,
``eps1`` full station, ``eps2`` lower bound on ``R``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import lsq_linear

from ..errors import ConfigError
from ..zone_model import DEFAULT_EPS, DecisionSet, ZoneConfig, fleet_rate_bound, flow_matrices

DEFAULT_TOL = 1e-5


@dataclass(frozen=True, eq=False)
class KKTCertificate:
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    omega: np.ndarray
    mu: np.ndarray
    nu: np.ndarray
    delta: np.ndarray
    stationarity_residual: float = float("nan")
    complementarity_residual: float = float("nan")
    feasibility_residual: float = float("nan")

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "omega", "mu", "nu", "delta"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
            if name != "delta" and np.any(arr < 0):
                raise ConfigError("inequality multipliers must be nonnegative", field=name)

    @classmethod
    def zeros(cls, n: int) -> "KKTCertificate":
        return cls(
            alpha=np.zeros(n),
            beta=np.zeros(2),
            gamma=np.zeros(n + 1),
            omega=np.zeros(n + 1),
            mu=np.zeros((n, n)),
            nu=np.zeros((n, n)),
            delta=np.zeros(n),
        )

    @property
    def certified(self) -> bool:
        return max(self.stationarity_residual, self.complementarity_residual, self.feasibility_residual) <= DEFAULT_TOL

    def to_dict(self) -> dict:
        tri = lambda a: [row[: i + 1].tolist() for i, row in enumerate(a)]  # noqa: E731
        return {
            "alpha": self.alpha.tolist(),
            "beta": self.beta.tolist(),
            "gamma": self.gamma.tolist(),
            "omega": self.omega.tolist(),
            "mu": tri(self.mu),
            "nu": tri(self.nu),
            "delta": self.delta.tolist(),
            "stationarity_residual": self.stationarity_residual,
            "complementarity_residual": self.complementarity_residual,
            "feasibility_residual": self.feasibility_residual,
        }


@dataclass(frozen=True)
class KKTResiduals:
    stationarity: float
    complementarity: float
    feasibility: float
    tol: float = DEFAULT_TOL
    gradient: tuple = field(default=(), repr=False)

    @property
    def certified(self) -> bool:
        return max(self.stationarity, self.complementarity, self.feasibility) <= self.tol


def _unpack(cfg: ZoneConfig, d: DecisionSet | tuple):
    if isinstance(d, DecisionSet):
        q, pi = d.q, d.pi
    else:
        q, pi = (np.asarray(a, dtype=float) for a in d)
    if q.shape != (cfg.n,) or pi.shape != (cfg.n, cfg.n):
        raise ConfigError(f"decision dimensions do not match n={cfg.n}", field="n")
    return q, pi


def _check_cert(cfg: ZoneConfig, c: KKTCertificate) -> None:
    n = cfg.n
    shapes = {
        "alpha": (n,), "beta": (2,), "gamma": (n + 1,), "omega": (n + 1,),
        "mu": (n, n), "nu": (n, n), "delta": (n,),
    }
    for name, shape in shapes.items():
        if getattr(c, name).shape != shape:
            raise ConfigError(f"expected shape {shape}", field=name)


def constraint_values(cfg: ZoneConfig, d, r: float, eps: float = DEFAULT_EPS) -> dict[str, np.ndarray]:
    """Every inequality as ``g <= 0`` plus the row-sum equalities ``h == 0``."""
    q, pi = _unpack(cfg, d)
    a, b = flow_matrices(cfg)
    marg = pi.T @ (a + b @ q) - np.asarray(cfg.lambda_c)
    p = np.asarray(cfg.p)
    lv = cfg.lambda_v
    tri = np.tril(np.ones((cfg.n, cfg.n), dtype=bool))
    return {
        "alpha": r - marg,
        "beta": np.array([
            lv * np.sum(p * (1.0 - q)) - cfg.partial_capacity + eps,
            lv * p[0] * q[0] - cfg.mu_c + eps,
        ]),
        "gamma": np.append(q - 1.0, r - fleet_rate_bound(cfg)),
        "omega": np.append(-q, eps - r),
        "nu": np.where(tri, pi - 1.0, 0.0),
        "mu": np.where(tri, -pi, 0.0),
        "delta": pi.sum(axis=1) - 1.0,
    }


def lagrangian(cfg: ZoneConfig, d, r: float, cert: KKTCertificate, eps: float = DEFAULT_EPS) -> float:
    """Lagrangian of the minimization form (objective ``-R``)."""
    g = constraint_values(cfg, d, r, eps)
    val = -r
    for name in ("alpha", "beta", "gamma", "omega", "nu", "mu", "delta"):
        val += float(np.sum(getattr(cert, name) * g[name]))
    return val


def lagrangian_gradient(cfg: ZoneConfig, d, r: float, cert: KKTCertificate) -> tuple[np.ndarray, np.ndarray, float]:
    """Closed-form partial derivatives of the Lagrangian.

    Returns ``(dL/dq, dL/dpi, dL/dR)``; ``dL/dpi`` is zero above the diagonal.
    Written out term by term from the expanded flow expressions, not through
    the matrix form used by :func:`lagrangian`, so that the two can check
    each other.
    """
    q, pi = _unpack(cfg, d)
    _check_cert(cfg, cert)
    n = cfg.n
    lv = cfg.lambda_v
    p = np.asarray(cfg.p)
    al, be, ga, om = cert.alpha, cert.beta, cert.gamma, cert.omega
    # 1-based helpers
    P = lambda i, j: pi[i - 1, j - 1]  # noqa: E731
    A = lambda j: al[j - 1]  # noqa: E731

    dq = np.zeros(n)
    for i in range(1, n):
        inner = sum(A(j) * (P(i + 1, j) - P(i, j)) for j in range(1, i + 1)) + A(i + 1) * P(i + 1, i + 1)
        dq[i] = lv * p[i] * (inner - be[0]) - om[i] + ga[i]
    dq[0] = lv * p[0] * (A(1) * P(1, 1) - sum(A(j) * P(n, j) for j in range(1, n + 1)) - be[0] + be[1]) - om[0] + ga[0]

    dpi = np.zeros((n, n))
    for i in range(1, n + 1):
        if i < n:
            flow = p[i - 1] * q[i - 1] - p[i - 1] - p[i] * q[i]
        else:
            flow = p[n - 1] * q[n - 1] - p[n - 1] - p[0] * q[0]
        for j in range(1, i + 1):
            dpi[i - 1, j - 1] = (
                A(j) * lv * flow + cert.delta[i - 1] + cert.nu[i - 1, j - 1] - cert.mu[i - 1, j - 1]
            )
    dr = -1.0 + float(np.sum(al)) - om[n] + ga[n]
    return dq, dpi, dr


def kkt_residuals(
    cfg: ZoneConfig,
    d,
    r: float,
    cert: KKTCertificate,
    eps: float = DEFAULT_EPS,
    tol: float = DEFAULT_TOL,
) -> KKTResiduals:
    """Max-norm stationarity, complementarity and primal-feasibility residuals."""
    _check_cert(cfg, cert)
    dq, dpi, dr = lagrangian_gradient(cfg, d, r, cert)
    tri = np.tril(np.ones((cfg.n, cfg.n), dtype=bool))
    stat = max(float(np.max(np.abs(dq))), float(np.max(np.abs(dpi[tri]))), abs(dr))
    g = constraint_values(cfg, d, r, eps)
    comp = 0.0
    feas = 0.0
    for name in ("alpha", "beta", "gamma", "omega", "nu", "mu"):
        vals = g[name] if name not in ("nu", "mu") else g[name][tri]
        mult = getattr(cert, name) if name not in ("nu", "mu") else getattr(cert, name)[tri]
        comp = max(comp, float(np.max(np.abs(mult * vals))))
        feas = max(feas, float(np.max(np.maximum(vals, 0.0))))
    comp = max(comp, float(np.max(np.abs(cert.delta * g["delta"]))))
    feas = max(feas, float(np.max(np.abs(g["delta"]))))
    return KKTResiduals(stat, comp, feas, tol, gradient=(dq, dpi, dr))


def recover_multipliers(
    cfg: ZoneConfig,
    d,
    r: float,
    eps: float = DEFAULT_EPS,
    active_tol: float = 1e-7,
) -> KKTCertificate:
    """Fit multipliers to the stationarity equations by bounded least squares.

    Multipliers of constraints with slack above ``active_tol`` are fixed at
    zero; the rest are fitted with nonnegativity (row-sum multipliers free).
    Residuals are filled in on the returned certificate.
    """
    q, pi = _unpack(cfg, d)
    n = cfg.n
    rows, cols = np.tril_indices(n)
    m = rows.size
    nx = n + m + 1  # q, pi entries, R
    a, b = flow_matrices(cfg)
    lvc = a + b @ q
    p = np.asarray(cfg.p)
    g = constraint_values(cfg, (q, pi), r, eps)

    columns: list[np.ndarray] = []
    slots: list[tuple[str, tuple]] = []
    free: list[bool] = []

    def add(name, idx, grad, is_free=False):
        columns.append(grad)
        slots.append((name, idx))
        free.append(is_free)

    for i in range(n):
        if g["alpha"][i] >= -active_tol:
            grad = np.zeros(nx)
            grad[:n] = -(pi[:, i] @ b)
            sel = cols == i
            grad[n + np.flatnonzero(sel)] = -lvc[rows[sel]]
            grad[-1] = 1.0
            add("alpha", (i,), grad)
    if g["beta"][0] >= -active_tol:
        grad = np.zeros(nx)
        grad[:n] = -cfg.lambda_v * p
        add("beta", (0,), grad)
    if g["beta"][1] >= -active_tol:
        grad = np.zeros(nx)
        grad[0] = cfg.lambda_v * p[0]
        add("beta", (1,), grad)
    for i in range(n + 1):
        x = i if i < n else nx - 1
        if g["gamma"][i] >= -active_tol:
            grad = np.zeros(nx)
            grad[x] = 1.0
            add("gamma", (i,), grad)
        if g["omega"][i] >= -active_tol:
            grad = np.zeros(nx)
            grad[x] = -1.0
            add("omega", (i,), grad)
    for e in range(m):
        k, j = rows[e], cols[e]
        if g["nu"][k, j] >= -active_tol:
            grad = np.zeros(nx)
            grad[n + e] = 1.0
            add("nu", (k, j), grad)
        if g["mu"][k, j] >= -active_tol:
            grad = np.zeros(nx)
            grad[n + e] = -1.0
            add("mu", (k, j), grad)
    for k in range(n):
        grad = np.zeros(nx)
        grad[n + np.flatnonzero(rows == k)] = 1.0
        add("delta", (k,), grad, is_free=True)

    J = np.column_stack(columns)
    target = np.zeros(nx)
    target[-1] = 1.0  # -grad(-R)
    lb = np.where(free, -np.inf, 0.0)
    ub = np.full(len(columns), np.inf)
    sol = lsq_linear(J, target, bounds=(lb, ub), method="bvls", tol=1e-14, lsmr_tol=None)

    cert = KKTCertificate.zeros(n)
    arrays = {name: np.array(getattr(cert, name)) for name in ("alpha", "beta", "gamma", "omega", "mu", "nu", "delta")}
    for (name, idx), val in zip(slots, sol.x):
        arrays[name][idx] = val if name == "delta" else max(val, 0.0)
    cert = KKTCertificate(**arrays)
    res = kkt_residuals(cfg, (q, pi), r, cert, eps)
    return replace(
        cert,
        stationarity_residual=res.stationarity,
        complementarity_residual=res.complementarity,
        feasibility_residual=res.feasibility,
    )


def certify(cfg: ZoneConfig, d, r: float | None = None, eps: float = DEFAULT_EPS) -> KKTCertificate:
    """Recover multipliers at ``d``; ``r`` defaults to the point's minimum margin."""
    q, pi = _unpack(cfg, d)
    if r is None:
        a, b = flow_matrices(cfg)
        r = float(np.min(pi.T @ (a + b @ q) - np.asarray(cfg.lambda_c)))
    return recover_multipliers(cfg, (q, pi), r, eps)
