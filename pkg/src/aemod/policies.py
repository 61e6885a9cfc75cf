"""Baseline and optimized decision policies used in comparison experiments."""

from __future__ import annotations

from enum import Enum

import numpy as np

from .errors import ConfigError
from .optimizer import SolverConfig, solve, solve_charging_only
from .zone_model import DecisionSet, ZoneConfig


class PolicyKind(str, Enum):
    """Policy identifiers; the values are the stable CLI/CSV names."""

    OPTIMAL_JOINT = "optimal"
    OPTIMIZED_CHARGE_SAME_CLASS = "opt-charge-same-class"
    ALWAYS_PARTIAL_SAME_CLASS = "partial-same-class"
    EQUAL_SPLIT_SAME_CLASS = "split-same-class"
    ALWAYS_PARTIAL_PROPORTIONAL = "partial-proportional"
    EQUAL_SPLIT_PROPORTIONAL = "split-proportional"

    @classmethod
    def parse(cls, name: str) -> "PolicyKind":
        try:
            return cls(name)
        except ValueError:
            valid = ", ".join(k.value for k in cls)
            raise ConfigError(f"unknown policy {name!r} (expected one of: {valid})", field="policies") from None

    @property
    def optimized(self) -> bool:
        return self in (PolicyKind.OPTIMAL_JOINT, PolicyKind.OPTIMIZED_CHARGE_SAME_CLASS)


BASELINES = (
    PolicyKind.OPTIMIZED_CHARGE_SAME_CLASS,
    PolicyKind.ALWAYS_PARTIAL_SAME_CLASS,
    PolicyKind.EQUAL_SPLIT_SAME_CLASS,
    PolicyKind.ALWAYS_PARTIAL_PROPORTIONAL,
    PolicyKind.EQUAL_SPLIT_PROPORTIONAL,
)


def proportional_dispatch(lambda_c) -> np.ndarray:
    """Row k splits over sub-classes ``j <= k`` in proportion to their demand."""
    lam = np.asarray(lambda_c, dtype=float)
    n = lam.shape[0]
    pi = np.tril(np.tile(lam, (n, 1)))
    return pi / pi.sum(axis=1, keepdims=True)


def fixed_baselines(cfg: ZoneConfig) -> dict[PolicyKind, DecisionSet]:
    """The four policies that do not depend on any optimization."""
    n = cfg.n
    eye = np.eye(n)
    prop = proportional_dispatch(cfg.lambda_c)
    zeros, halves = np.zeros(n), np.full(n, 0.5)
    return {
        PolicyKind.ALWAYS_PARTIAL_SAME_CLASS: DecisionSet(zeros, eye),
        PolicyKind.EQUAL_SPLIT_SAME_CLASS: DecisionSet(halves, eye),
        PolicyKind.ALWAYS_PARTIAL_PROPORTIONAL: DecisionSet(zeros, prop),
        PolicyKind.EQUAL_SPLIT_PROPORTIONAL: DecisionSet(halves, prop),
    }


def build_policy(kind: PolicyKind | str, cfg: ZoneConfig, sc: SolverConfig | None = None) -> DecisionSet:
    kind = PolicyKind.parse(kind) if isinstance(kind, str) and not isinstance(kind, PolicyKind) else kind
    if kind is PolicyKind.OPTIMAL_JOINT:
        return solve(cfg, sc).decisions
    if kind is PolicyKind.OPTIMIZED_CHARGE_SAME_CLASS:
        return solve_charging_only(cfg, np.eye(cfg.n), sc).decisions
    return fixed_baselines(cfg)[kind]
