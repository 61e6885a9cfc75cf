"""JSON experiment schema.

One JSON document per experiment; keys are snake_case and every rate is in
min^-1. ``base.p`` may be an explicit list or one of ``"decreasing"``
(``p_i`` proportional to ``n - i``) and ``"uniform"``.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from ..errors import ConfigError
from ..optimizer import SolverConfig
from ..policies import PolicyKind
from ..simulator import SimConfig
from ..zone_model import DecisionSet, ZoneConfig

ExperimentKind = Literal["load_sweep", "charging_sweep", "policy_compare", "single_solve", "single_sim"]
Shape = Literal["decreasing", "uniform", "custom"]


def soc_distribution(shape: str, n: int) -> list[float]:
    if shape == "decreasing":
        w = np.arange(n, 0, -1, dtype=float)
    elif shape == "uniform":
        w = np.ones(n)
    else:
        raise ConfigError(f"unknown distribution {shape!r}", field="base.p")
    return (w / w.sum()).tolist()


def demand_weights(shape: str, n: int, custom=None) -> np.ndarray:
    """Class weights used to spread a total demand target over classes 1..n."""
    if shape == "decreasing":
        w = np.arange(n, 0, -1, dtype=float)  # n+1-i for i = 1..n
    elif shape == "uniform":
        w = np.ones(n)
    else:
        if custom is None:
            raise ConfigError("custom demand shape needs lambda_c_custom or base.lambda_c", field="lambda_c_custom")
        w = np.asarray(custom, dtype=float)
        if w.shape != (n,) or np.any(w <= 0):
            raise ConfigError(f"needs {n} positive entries", field="lambda_c_custom")
    return w / w.sum()


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ZoneSpec(_Strict):
    n: int
    lambda_v: float
    p: Union[list[float], Literal["decreasing", "uniform"]]
    lambda_c: Optional[list[float]] = None
    mu_c: float
    c_points: int


class SolverSpec(_Strict):
    starts: int = 64
    max_iters: int = 5000
    step_tol: float = 1e-8
    eps_strict: float = 1e-6
    seed: int = 0
    grid_steps: int = 101

    def build(self) -> SolverConfig:
        return SolverConfig(**self.model_dump())


class SimSpec(_Strict):
    horizon_customers: int = 1_000_000
    warmup_fraction: float = 0.1
    replications: int = 10
    seed: int = 0
    mode: Literal["analytical_mm1", "vehicle_flow"] = "analytical_mm1"

    def build(self) -> SimConfig:
        return SimConfig(**self.model_dump())


class DecisionSpec(_Strict):
    q: list[float]
    pi: list[list[float]]


class ExperimentSpec(_Strict):
    kind: ExperimentKind
    base: ZoneSpec
    sweep_values: list[float] = []
    policies: Optional[list[str]] = None
    solver: SolverSpec = SolverSpec()
    sim: Optional[SimSpec] = None
    lambda_c_shape: Shape = "custom"
    lambda_c_custom: Optional[list[float]] = None
    decisions: Optional[DecisionSpec] = None

    @field_validator("sweep_values")
    @classmethod
    def _increasing(cls, v: list[float]) -> list[float]:
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("sweep_values must be strictly increasing")
        return v

    @field_validator("policies")
    @classmethod
    def _known_policies(cls, v):
        if v is not None:
            for name in v:
                try:
                    PolicyKind(name)
                except ValueError:
                    raise ValueError(f"unknown policy {name!r}") from None
        return v

    @model_validator(mode="after")
    def _kind_requirements(self):
        if self.kind in ("load_sweep", "charging_sweep") and not self.sweep_values:
            raise ValueError(f"{self.kind} needs sweep_values")
        if self.kind == "load_sweep" and any(v >= self.base.lambda_v for v in self.sweep_values):
            raise ValueError("load_sweep values must stay below base.lambda_v")
        if self.kind == "charging_sweep" and any(v != int(v) or v < 1 for v in self.sweep_values):
            raise ValueError("charging_sweep values are charging-point counts (positive integers)")
        return self

    # -- domain objects ---------------------------------------------------

    def policy_kinds(self) -> list[PolicyKind]:
        if self.policies is not None:
            return [PolicyKind(p) for p in self.policies]
        if self.kind == "charging_sweep":
            return [PolicyKind.OPTIMAL_JOINT, PolicyKind.OPTIMIZED_CHARGE_SAME_CLASS]
        return list(PolicyKind)

    def solver_config(self) -> SolverConfig:
        return _wrap("solver", self.solver.build)

    def sim_config(self) -> SimConfig | None:
        return None if self.sim is None else _wrap("sim", self.sim.build)

    def zone(self, total_demand: float | None = None, c_points: int | None = None) -> ZoneConfig:
        """Zone for this experiment, optionally with a demand target or point count swapped in."""
        b = self.base
        p = soc_distribution(b.p, b.n) if isinstance(b.p, str) else b.p
        if total_demand is not None:
            lam = (total_demand * demand_weights(self.lambda_c_shape, b.n, self.lambda_c_custom or b.lambda_c)).tolist()
        elif b.lambda_c is not None:
            lam = b.lambda_c
        else:
            raise ConfigError(f"{self.kind} needs explicit base.lambda_c", field="base.lambda_c")
        return _wrap(
            "base",
            lambda: ZoneConfig(
                n=b.n, lambda_v=b.lambda_v, p=p, lambda_c=lam, mu_c=b.mu_c,
                c_points=b.c_points if c_points is None else int(c_points),
            ),
        )

    def decision_set(self) -> DecisionSet | None:
        if self.decisions is None:
            return None
        return _wrap("decisions", lambda: DecisionSet.from_dict(self.decisions.model_dump()))


def _wrap(prefix: str, build):
    try:
        return build()
    except ConfigError as exc:
        field = f"{prefix}.{exc.field}" if exc.field else prefix
        raise ConfigError(exc.detail, field=field) from None


def _format_validation(exc: ValidationError) -> ConfigError:
    err = exc.errors()[0]
    loc = ".".join(str(x) for x in err["loc"]) or "<root>"
    return ConfigError(err["msg"], field=loc)


def parse_config(data: dict) -> ExperimentSpec:
    """Validate a decoded JSON document, including every domain invariant."""
    try:
        spec = ExperimentSpec.model_validate(data)
    except ValidationError as exc:
        raise _format_validation(exc) from None
    spec.solver_config()
    spec.sim_config()
    spec.decision_set()
    spec.zone(total_demand=spec.sweep_values[0] if spec.kind == "load_sweep" else None)
    return spec


def load_config(path: str | Path) -> ExperimentSpec:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}", field="<file>") from None
    if not isinstance(data, dict):
        raise ConfigError("top level must be a JSON object", field="<root>")
    return parse_config(data)


def dump_config(spec: ExperimentSpec) -> str:
    return json.dumps(spec.model_dump(exclude_none=True), indent=2) + "\n"


def save_config(spec: ExperimentSpec, path: str | Path) -> None:
    Path(path).write_text(dump_config(spec))
