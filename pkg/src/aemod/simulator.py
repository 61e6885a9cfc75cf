"""Event-driven simulation of one zone's charging and dispatch network.

Random numbers come from NumPy's PCG64 generator (``numpy.random.default_rng``),
seeded with ``seed + r`` for replication ``r``. Draws are taken in fixed-size
blocks from one stream per replication, in event order, so a given seed
reproduces the same event trace exactly.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import asdict, dataclass
from enum import Enum
from typing import TextIO

import numpy as np

from .errors import ConfigError
from .zone_model import DecisionSet, ZoneConfig, check_stability, effective_service_rates

_BLOCK = 1 << 15

# event kinds
_VEH, _CUST, _SERVE, _PARTIAL, _FULL = range(5)
_KIND_NAMES = ("vehicle_arrival", "customer_arrival", "customer_service", "partial_charge_done", "full_charge_done")


class SimMode(str, Enum):
    ANALYTICAL_MM1 = "analytical_mm1"
    VEHICLE_FLOW = "vehicle_flow"


@dataclass(frozen=True)
class SimConfig:
    horizon_customers: int = 1_000_000
    warmup_fraction: float = 0.1
    replications: int = 10
    seed: int = 0
    mode: SimMode = SimMode.ANALYTICAL_MM1

    def __post_init__(self):
        if isinstance(self.horizon_customers, bool) or int(self.horizon_customers) != self.horizon_customers:
            raise ConfigError("must be an integer", field="horizon_customers")
        if self.horizon_customers < 1000:
            raise ConfigError("must be at least 1000", field="horizon_customers")
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise ConfigError("must lie in [0, 1)", field="warmup_fraction")
        if isinstance(self.replications, bool) or int(self.replications) != self.replications or self.replications < 1:
            raise ConfigError("must be a positive integer", field="replications")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ConfigError("must be a nonnegative integer", field="seed")
        try:
            object.__setattr__(self, "mode", SimMode(self.mode))
        except ValueError:
            raise ConfigError(f"unknown mode {self.mode!r}", field="mode") from None
        object.__setattr__(self, "horizon_customers", int(self.horizon_customers))
        object.__setattr__(self, "replications", int(self.replications))
        object.__setattr__(self, "seed", int(self.seed))


@dataclass(frozen=True)
class QueueStats:
    name: str
    arrival_rate: float
    utilization: float
    mean_length: float


@dataclass(frozen=True)
class SimReport:
    mode: str
    mean_response: tuple[float, ...]
    ci95_halfwidth: tuple[float, ...]
    max_class: int  # 1-based
    queue_stats: tuple[QueueStats, ...]  # customer queues 1..n, then partial, full
    events_processed: int
    completions: tuple[int, ...]
    ready_vehicle_rate: float
    stable: bool
    censored: bool

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class DivergenceReport:
    analytic: tuple[float, ...]
    mm1: SimReport
    vehicle_flow: SimReport
    mm1_rel_error: tuple[float, ...]
    vehicle_flow_rel_error: tuple[float, ...]


class _Draws:
    """Block-buffered standard exponential and uniform variates from one generator."""

    __slots__ = ("rng", "_e", "_ei", "_u", "_ui")

    def __init__(self, seed: int):
        self.rng = np.random.default_rng(seed)
        self._e = self.rng.standard_exponential(_BLOCK).tolist()
        self._ei = 0
        self._u = self.rng.random(_BLOCK).tolist()
        self._ui = 0

    def exp(self) -> float:
        if self._ei == _BLOCK:
            self._e = self.rng.standard_exponential(_BLOCK).tolist()
            self._ei = 0
        v = self._e[self._ei]
        self._ei += 1
        return v

    def uniform(self) -> float:
        if self._ui == _BLOCK:
            self._u = self.rng.random(_BLOCK).tolist()
            self._ui = 0
        v = self._u[self._ui]
        self._ui += 1
        return v


def _pick(cum: list[float], u: float) -> int:
    for i, c in enumerate(cum):
        if u < c:
            return i
    return len(cum) - 1


class _Area:
    """Time integral of a piecewise-constant level (queue length, busy servers)."""

    __slots__ = ("level", "busy", "servers", "area", "busy_area", "last", "arrivals")

    def __init__(self, servers: int):
        self.level = 0
        self.busy = 0
        self.servers = servers
        self.area = 0.0
        self.busy_area = 0.0
        self.last = 0.0
        self.arrivals = 0

    def advance(self, t: float) -> None:
        dt = t - self.last
        self.area += self.level * dt
        self.busy_area += self.busy * dt
        self.last = t

    def reset(self, t: float) -> None:
        self.advance(t)
        self.area = 0.0
        self.busy_area = 0.0
        self.arrivals = 0


def _run_once(cfg: ZoneConfig, d: DecisionSet, horizon: int, warmup: int, mode: SimMode, seed: int,
              lvs: np.ndarray, trace: TextIO | None):
    n = cfg.n
    rng = _Draws(seed)
    exp, unif = rng.exp, rng.uniform
    lam_v = cfg.lambda_v
    lam_c_tot = math.fsum(cfg.lambda_c)
    p_cum = np.cumsum(cfg.p).tolist()
    c_cum = (np.cumsum(cfg.lambda_c) / lam_c_tot).tolist()
    pi_cum = [np.cumsum(d.pi[k, : k + 1]).tolist() for k in range(n)]
    q = d.q.tolist()
    part_rate = n * cfg.mu_c
    full_rate = cfg.mu_c
    C = cfg.c_points
    serve_rate = lvs.tolist()
    analytic = mode is SimMode.ANALYTICAL_MM1

    heap: list = []
    seq = 0

    def push(t, kind, data):
        nonlocal seq
        heapq.heappush(heap, (t, seq, kind, data))
        seq += 1

    cust = [_Area(1) for _ in range(n)]
    waiting: list[deque] = [deque() for _ in range(n)]
    pools = [0] * n
    partial, full = _Area(C), _Area(1)
    partial_q: deque = deque()
    full_q: deque = deque()

    sums = [0.0] * n
    counts = [0] * n
    done = 0
    ready = 0
    t_stats = 0.0
    events = 0
    last_t = 0.0

    push(exp() / lam_v, _VEH, 0)
    push(exp() / lam_c_tot, _CUST, 0)

    def complete(i, arrived, t):
        nonlocal done, t_stats, ready
        done += 1
        if done > warmup:
            sums[i] += t - arrived
            counts[i] += 1
        elif done == warmup:
            t_stats = t
            ready = 0
            for a in cust:
                a.reset(t)
            partial.reset(t)
            full.reset(t)

    def vehicle_ready(k, t):
        nonlocal ready
        ready += 1
        j = _pick(pi_cum[k], unif())
        if analytic:
            return
        if waiting[j]:
            a = cust[j]
            a.advance(t)
            a.level -= 1
            a.busy = 1 if a.level else 0
            complete(j, waiting[j].popleft(), t)
        else:
            pools[j] += 1

    if warmup == 0:
        t_stats = 0.0
    while done < horizon:
        t, _, kind, data = heapq.heappop(heap)
        if t < last_t:
            raise RuntimeError(f"event at {t} processed after {last_t}")
        last_t = t
        events += 1
        if trace is not None:
            cls = "-" if kind in (_VEH, _CUST) else data + 1
            trace.write(f"{t!r}\t{_KIND_NAMES[kind]}\t{cls}\t{_queue_of(kind)}\n")
        if kind == _VEH:
            push(t + exp() / lam_v, _VEH, 0)
            c = _pick(p_cum, unif())  # SoC class on arrival, 0..n-1
            if c == 0:
                if unif() < q[0]:
                    full.advance(t)
                    full.arrivals += 1
                    full.level += 1
                    if full.busy == 0:
                        full.busy = 1
                        push(t + exp() / full_rate, _FULL, n - 1)
                    else:
                        full_q.append(n - 1)
                    continue
                target = 0
            elif unif() < q[c]:
                vehicle_ready(c - 1, t)
                continue
            else:
                target = c  # partially charge up one class: ready class c+1
            partial.advance(t)
            partial.arrivals += 1
            partial.level += 1
            if partial.busy < C:
                partial.busy += 1
                push(t + exp() / part_rate, _PARTIAL, target)
            else:
                partial_q.append(target)
        elif kind == _CUST:
            push(t + exp() / lam_c_tot, _CUST, 0)
            i = _pick(c_cum, unif())
            a = cust[i]
            a.advance(t)
            a.arrivals += 1
            if analytic:
                waiting[i].append(t)
                a.level += 1
                if a.level == 1:
                    a.busy = 1
                    push(t + exp() / serve_rate[i], _SERVE, i)
            elif pools[i]:
                pools[i] -= 1
                complete(i, t, t)
            else:
                waiting[i].append(t)
                a.level += 1
                a.busy = 1
        elif kind == _SERVE:
            i = data
            a = cust[i]
            a.advance(t)
            a.level -= 1
            complete(i, waiting[i].popleft(), t)
            if a.level:
                push(t + exp() / serve_rate[i], _SERVE, i)
            else:
                a.busy = 0
        elif kind == _PARTIAL:
            partial.advance(t)
            partial.level -= 1
            if partial_q:
                push(t + exp() / part_rate, _PARTIAL, partial_q.popleft())
            else:
                partial.busy -= 1
            vehicle_ready(data, t)
        else:  # _FULL
            full.advance(t)
            full.level -= 1
            if full_q:
                push(t + exp() / full_rate, _FULL, full_q.popleft())
            else:
                full.busy = 0
            vehicle_ready(data, t)

    t_end = last_t
    for a in (*cust, partial, full):
        a.advance(t_end)
    span = max(t_end - t_stats, 1e-300)
    means = [sums[i] / counts[i] if counts[i] else math.nan for i in range(n)]
    stats = []
    for i, a in enumerate(cust):
        stats.append((f"customer_{i + 1}", a.arrivals / span, a.busy_area / span, a.area / span))
    stats.append(("partial_charging", partial.arrivals / span, partial.busy_area / (span * C), partial.area / span))
    stats.append(("full_station", full.arrivals / span, full.busy_area / span, full.area / span))
    return means, counts, stats, events, ready / span


def _queue_of(kind: int) -> str:
    if kind in (_CUST, _SERVE):
        return "customer"
    if kind == _PARTIAL:
        return "partial_charging"
    if kind == _FULL:
        return "full_station"
    return "arrival"


def simulate(cfg: ZoneConfig, d: DecisionSet, sim: SimConfig | None = None, trace: TextIO | None = None) -> SimReport:
    """Simulate ``sim.replications`` independent runs and pool per-class statistics.

    ``sim.horizon_customers`` counts completed customers over all classes; the
    first ``warmup_fraction`` of them are discarded. Runs of an unstable
    configuration are allowed but marked ``censored``. ``trace``, when given,
    receives one tab-separated line per event.
    """
    sim = sim or SimConfig()
    if d.n != cfg.n:
        raise ConfigError(f"decision set has {d.n} classes, zone has {cfg.n}", field="n")
    lvs = np.asarray(effective_service_rates(cfg, d).lambda_vs)
    if sim.mode is SimMode.ANALYTICAL_MM1 and np.any(lvs <= 0):
        k = int(np.flatnonzero(lvs <= 0)[0]) + 1
        raise ConfigError(f"class {k} has nonpositive service rate {lvs[k - 1]!r}", field="decisions")
    rep = check_stability(cfg, d, 0.0, eps=0.0)
    stable = (
        all(m > 0 for m in rep.margins)
        and rep.partial_charging_load < cfg.partial_capacity
        and rep.full_station_load < cfg.mu_c
    )
    warmup = int(sim.warmup_fraction * sim.horizon_customers)

    rep_means, rep_counts, rep_stats = [], [], []
    events = 0
    ready = []
    for r in range(sim.replications):
        means, counts, stats, ev, rdy = _run_once(
            cfg, d, sim.horizon_customers, warmup, sim.mode, sim.seed + r, lvs, trace
        )
        rep_means.append(means)
        rep_counts.append(counts)
        rep_stats.append(stats)
        events += ev
        ready.append(rdy)

    M = np.array(rep_means)
    with np.errstate(all="ignore"):
        mean = np.nanmean(M, axis=0) if np.any(~np.isnan(M)) else np.full(cfg.n, np.nan)
        if sim.replications > 1:
            k = np.sum(~np.isnan(M), axis=0)
            sd = np.nanstd(M, axis=0, ddof=1)
            half = np.where(k > 1, 1.96 * sd / np.sqrt(k), np.inf)
        else:
            half = np.full(cfg.n, np.inf)
    max_class = int(np.nanargmax(mean)) + 1 if np.any(~np.isnan(mean)) else 0
    names = [s[0] for s in rep_stats[0]]
    pooled = np.mean(np.array([[s[1:] for s in st] for st in rep_stats]), axis=0)
    queue_stats = tuple(QueueStats(nm, *map(float, row)) for nm, row in zip(names, pooled))
    return SimReport(
        mode=sim.mode.value,
        mean_response=tuple(float(v) for v in mean),
        ci95_halfwidth=tuple(float(v) for v in half),
        max_class=max_class,
        queue_stats=queue_stats,
        events_processed=events,
        completions=tuple(int(v) for v in np.sum(rep_counts, axis=0)),
        ready_vehicle_rate=float(np.mean(ready)),
        stable=bool(stable),
        censored=not stable,
    )


def compare_sim_vs_analytic(cfg: ZoneConfig, d: DecisionSet, sim: SimConfig | None = None) -> DivergenceReport:
    """Relative error of simulated mean response against ``1/(lambda_vs - lambda_c)``, in both modes."""
    sim = sim or SimConfig()
    rates = effective_service_rates(cfg, d)
    with np.errstate(divide="ignore"):
        analytic = np.where(np.asarray(rates.margins) > 0, 1.0 / np.asarray(rates.margins), np.inf)
    mm1 = simulate(cfg, d, SimConfig(sim.horizon_customers, sim.warmup_fraction, sim.replications, sim.seed,
                                     SimMode.ANALYTICAL_MM1))
    flow = simulate(cfg, d, SimConfig(sim.horizon_customers, sim.warmup_fraction, sim.replications, sim.seed,
                                      SimMode.VEHICLE_FLOW))

    def rel(rep: SimReport):
        with np.errstate(all="ignore"):
            return tuple(float(v) for v in np.abs(np.asarray(rep.mean_response) - analytic) / analytic)

    return DivergenceReport(tuple(analytic.tolist()), mm1, flow, rel(mm1), rel(flow))
