"""Command-line entry point.

Exit codes: 0 success, 2 validation error, 3 infeasible zone or no stable
charging decision, 4 internal error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..errors import ConfigError, InfeasibleZoneError, InstabilityError, NoFeasiblePointError
from ..optimizer import certify, solve
from ..policies import build_policy
from ..simulator import SimConfig, compare_sim_vs_analytic, simulate
from ..zone_model import analytic_response_times, check_stability, effective_service_rates
from .config import ExperimentSpec, load_config
from .experiments import emit_csv, run_experiment

log = logging.getLogger("aemod")

EXIT_OK, EXIT_VALIDATION, EXIT_INFEASIBLE, EXIT_INTERNAL = 0, 2, 3, 4


def _with_seed(spec: ExperimentSpec, seed: int | None) -> ExperimentSpec:
    if seed is None:
        return spec
    update = {"solver": spec.solver.model_copy(update={"seed": seed})}
    if spec.sim is not None:
        update["sim"] = spec.sim.model_copy(update={"seed": seed})
    return spec.model_copy(update=update)


def _decisions(spec: ExperimentSpec, cfg):
    d = spec.decision_set()
    if d is not None:
        return d
    kinds = spec.policy_kinds()
    return build_policy(kinds[0], cfg, spec.solver_config())


def _jsonable(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _dump(obj, out: str | None) -> None:
    _write(json.dumps(_jsonable(obj), indent=2) + "\n", out)


def cmd_rates(spec, args):
    cfg = spec.zone()
    d = _decisions(spec, cfg)
    rates = effective_service_rates(cfg, d)
    _dump({"decisions": d.to_dict(), **dataclasses.asdict(rates)}, args.out)


def cmd_check(spec, args):
    cfg = spec.zone()
    d = _decisions(spec, cfg)
    rep = check_stability(cfg, d, args.r, eps=spec.solver.eps_strict)
    out = {**dataclasses.asdict(rep), "stable": rep.stable}
    try:
        rt = analytic_response_times(cfg, d)
        out["response_times_min"] = list(rt.per_class)
        out["max_response_min"] = rt.max
        out["max_class"] = rt.argmax_class
    except InstabilityError as exc:
        out["response_times_min"] = None
        out["instability"] = str(exc)
    _dump(out, args.out)


def cmd_optimize(spec, args):
    cfg = spec.zone()
    res = solve(cfg, spec.solver_config())
    out = res.to_dict()
    if args.certify:
        out["kkt"] = certify(cfg, res.decisions, res.r_star, spec.solver.eps_strict).to_dict()
    _dump(out, args.out)


def cmd_simulate(spec, args):
    cfg = spec.zone()
    d = _decisions(spec, cfg)
    sim = spec.sim_config() or SimConfig()
    if args.compare:
        _dump(compare_sim_vs_analytic(cfg, d, sim), args.out)
        return
    if args.trace:
        with open(args.trace, "w") as fh:
            rep = simulate(cfg, d, sim, trace=fh)
    else:
        rep = simulate(cfg, d, sim)
    _dump(rep, args.out)


def cmd_sweep(spec, args):
    if spec.kind not in ("load_sweep", "charging_sweep"):
        raise ConfigError(f"sweep needs kind load_sweep or charging_sweep, got {spec.kind!r}", field="kind")
    text = emit_csv(run_experiment(spec))
    _write(text, args.out)


def cmd_compare(spec, args):
    spec = spec.model_copy(update={"kind": "policy_compare"})
    _write(emit_csv(run_experiment(spec)), args.out)


COMMANDS = {
    "rates": (cmd_rates, "per-class vehicle and service rates for the configured decisions"),
    "check": (cmd_check, "stability conditions and analytic response times"),
    "optimize": (cmd_optimize, "maximize the minimum response-rate margin"),
    "simulate": (cmd_simulate, "discrete-event simulation of the zone"),
    "sweep": (cmd_sweep, "load or charging-point sweep, CSV output"),
    "compare": (cmd_compare, "all policies at the base configuration, CSV output"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="experiment JSON file")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output path (default: stdout)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="override solver and simulation seeds")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="aemod", description=__doc__, parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_text, parents=[common])
        if name == "check":
            sp.add_argument("--r", type=float, default=0.0, help="response-rate limit R = 1/T")
        if name == "optimize":
            sp.add_argument("--certify", action="store_true", help="attach recovered KKT multipliers")
        if name == "simulate":
            sp.add_argument("--trace", help="write a tab-separated event trace here")
            sp.add_argument("--compare", action="store_true", help="run both modes against the analytic formula")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for name, default in (("config", None), ("out", None), ("seed", None), ("verbose", False)):
        if not hasattr(args, name):
            setattr(args, name, default)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.config is None:
        print("error: --config is required", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        spec = _with_seed(load_config(args.config), args.seed)
        COMMANDS[args.command][0](spec, args)
    except ConfigError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (InfeasibleZoneError, NoFeasiblePointError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception:  # noqa: BLE001
        log.exception("internal error")
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
