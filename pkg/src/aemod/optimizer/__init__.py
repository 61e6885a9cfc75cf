"""Solvers and certificates for the max-min charging and dispatch program."""

from .kkt import (
    KKTCertificate,
    KKTResiduals,
    certify,
    kkt_residuals,
    lagrangian,
    lagrangian_gradient,
    recover_multipliers,
)
from .oracle import brute_force_oracle
from .search import (
    SolveResult,
    SolverConfig,
    objective_min_margin,
    project_decisions,
    solve,
    solve_charging_only,
    suggest_and_improve,
)
from .theorem1 import BranchCandidate, default_hypotheses, theorem1_branch_candidates

__all__ = [
    "BranchCandidate",
    "KKTCertificate",
    "KKTResiduals",
    "SolveResult",
    "SolverConfig",
    "brute_force_oracle",
    "certify",
    "default_hypotheses",
    "kkt_residuals",
    "lagrangian",
    "lagrangian_gradient",
    "objective_min_margin",
    "project_decisions",
    "recover_multipliers",
    "solve",
    "solve_charging_only",
    "suggest_and_improve",
    "theorem1_branch_candidates",
]
