"""Replication drivers: scenario runs, parallel batches, oracle validation.

Replications are pure functions of (config, replication index), so a batch
gives identical results no matter how many workers execute it. Scenario
comparisons reuse the same (seed, replication) streams, which makes the
arrival times and sampled EV attributes common random numbers across
scenarios by construction.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import RunConfig
from .engine import Engine
from .metrics import MetricsReport, compute_report
from .rng import ReplicationStreams
from .station import ScenarioKind, Station


def build_station(config: RunConfig, engine: Engine, streams: ReplicationStreams,
                  scenario: Optional[ScenarioKind] = None,
                  record: bool = True, trace: Optional[list] = None) -> Station:
    return Station(
        engine, streams,
        scenario=scenario or config.scenario,
        lam=config.lam,
        horizon=config.horizon,
        queue_capacity=config.queue_capacity,
        profile=config.profile,
        sampling=config.sampling(),
        wq_kind=config.wq_estimator,
        wq_alpha=config.ewma_alpha,
        record=record,
        trace=trace,
    )


def run_replication(config: RunConfig, replication: int,
                    scenario: Optional[ScenarioKind] = None,
                    record: bool = True,
                    trace: Optional[list] = None,
                    return_station: bool = False):
    """Run one seeded replication to the horizon and report its metrics."""
    engine = Engine()
    streams = ReplicationStreams(config.seed, replication)
    station = build_station(config, engine, streams, scenario, record, trace)
    station.start()
    engine.run_until(config.horizon)
    station.finalize(config.horizon)
    report = compute_report(
        station, config.horizon, replication=replication, seed=config.seed,
        config_digest=config.digest(),
        include_reneged_waits=config.avg_wait_includes_reneged)
    if return_station:
        return report, station
    return report


def _worker(args) -> MetricsReport:
    config, replication, scenario_name = args
    scenario = ScenarioKind.from_name(scenario_name) if scenario_name else None
    return run_replication(config, replication, scenario, record=True)


def run_many(config: RunConfig, scenario: Optional[ScenarioKind] = None,
             rounds: Optional[int] = None,
             workers: Optional[int] = None) -> list[MetricsReport]:
    """Run `rounds` replications, optionally on a process pool.

    Results come back ordered by replication index regardless of worker
    count, so exports are reproducible byte for byte.
    """
    rounds = config.rounds if rounds is None else rounds
    if workers is None:
        workers = min(os.cpu_count() or 1, rounds)
    scenario_name = scenario.value if scenario else None
    jobs = [(config, r, scenario_name) for r in range(rounds)]
    if workers <= 1 or rounds == 1:
        return [_worker(job) for job in jobs]
    chunk = max(1, rounds // (workers * 8))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        reports = list(pool.map(_worker, jobs, chunksize=chunk))
    return reports


# ---------------- reduced-configuration oracle bridge ----------------


@dataclass(frozen=True)
class ValidationResult:
    """Simulated long-run behaviour of the reduced (memoryless) station."""

    lam: float
    mu: float
    capacity: int          # total system capacity: one charging + capacity-1 waiting
    theta: float
    arrivals: int
    blocked: int
    blocking_fraction: float
    occupancy_share: np.ndarray   # time share of 0..capacity in system
    mean_n_sys: float
    mean_queue_wait: float        # admitted agents, including zero waits
    dispatched_events: int


def run_validation(lam: float, mu: float, capacity: int, theta: float = 0.0,
                   arrivals: int = 1_000_000, seed: int = 815, replication: int = 0,
                   ) -> ValidationResult:
    """Drive the real engine and station in the reduced configuration.

    BlockingFC admission, exponential service at rate mu, Poisson arrivals
    at rate lam, and patience that is either infinite (theta == 0) or
    exponential at rate theta. `capacity` counts the EV being charged plus
    the waiting slots, matching the states of the analytic birth-death
    chain (capacity 1 means no waiting room at all).
    """
    if capacity < 1:
        raise ValueError(f"capacity must be >= 1, got {capacity}")
    if arrivals < 1:
        raise ValueError(f"need at least one arrival, got {arrivals}")
    engine = Engine()
    streams = ReplicationStreams(seed, replication)
    station = Station(
        engine, streams,
        scenario=ScenarioKind.BLOCKING_FC,
        lam=lam,
        horizon=math.inf,
        queue_capacity=capacity - 1,
        sampling=None,
        service_rate=mu,
        patience_mode="exponential" if theta > 0 else "infinite",
        patience_rate=theta,
        max_arrivals=arrivals,
        record=False,
        track_occupancy=True,
    )
    station.start()
    engine.run_all()
    station.finalize(engine.clock)

    occ = station.occupancy
    total = occ.sum()
    share = occ / total if total > 0 else occ
    states = np.arange(share.size)
    return ValidationResult(
        lam=lam, mu=mu, capacity=capacity, theta=theta,
        arrivals=station.arrivals,
        blocked=station.balked_forced,
        blocking_fraction=station.balked_forced / station.arrivals,
        occupancy_share=share,
        mean_n_sys=float(states @ share),
        mean_queue_wait=(station.serve_wait_sum / station.serve_wait_count
                         if station.serve_wait_count else 0.0),
        dispatched_events=engine.dispatched_count,
    )


def validation_grid(lams, mus, capacities, theta: float = 0.0,
                    arrivals: int = 1_000_000, seed: int = 815,
                    workers: Optional[int] = None) -> list[ValidationResult]:
    """Run `run_validation` over the Cartesian grid, cells in parallel."""
    cells = [(lam, mu, k) for lam in lams for mu in mus for k in capacities]
    if workers is None:
        workers = min(os.cpu_count() or 1, len(cells))
    args = [(lam, mu, k, theta, arrivals, seed) for lam, mu, k in cells]
    if workers <= 1 or len(cells) == 1:
        return [run_validation(*a) for a in args]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_validation_worker, args))


def _validation_worker(args) -> ValidationResult:
    return run_validation(*args)
