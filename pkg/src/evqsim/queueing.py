"""Closed-form results for single-server queues with impatient customers,
plus a generic birth-death steady-state solver.

These are the independent oracles the simulator is validated against in
reduced configurations (exponential service, memoryless patience).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def lambda_eff(lam: float, balk_prob: float) -> float:
    """Effective arrival rate into the queue after balking."""
    if not 0.0 <= balk_prob <= 1.0:
        raise ValueError(f"balk probability must lie in [0, 1], got {balk_prob!r}")
    return lam * (1.0 - balk_prob)


def mm1k_blocking(rho: float, k: int) -> float:
    """Blocking probability of an M/M/1 queue with total capacity k.

    (1 - rho) * rho**k / (1 - rho**(k+1)); at rho == 1 the formula is 0/0
    and the continuous limit 1/(k+1) is returned instead.
    """
    if k < 1:
        raise ValueError(f"capacity k must be >= 1, got {k}")
    if rho < 0.0:
        raise ValueError(f"traffic intensity must be >= 0, got {rho}")
    if rho == 0.0:
        return 0.0
    if rho == 1.0:
        return 1.0 / (k + 1)
    return (1.0 - rho) * rho**k / (1.0 - rho ** (k + 1))


def voluntary_balk_prob(w: int, sigma: float) -> float:
    """Probability an arrival refuses a non-full queue of length w.

    Evaluates exp(-(1 - w) * sigma) clamped into [0, 1]: the raw expression
    exceeds 1 for w > 1 (the exponent grows with queue length), and a
    probability must stay valid.
    """
    if w < 1:
        raise ValueError(f"queue length w must be >= 1, got {w}")
    if sigma < 0.0:
        raise ValueError(f"sensitivity sigma must be >= 0, got {sigma}")
    return min(1.0, math.exp(-(1.0 - w) * sigma))


@dataclass(frozen=True)
class SteadyState:
    """Stationary distribution of a finite birth-death chain."""

    probabilities: np.ndarray
    mean_population: float
    throughput: float  # steady-state flow rate through the chain (per minute)


def birth_death_steady_state(birth_rates, death_rates) -> SteadyState:
    """Solve a finite birth-death chain by the product-form recurrence.

    `birth_rates[i]` drives i -> i+1 and `death_rates[i]` drives i+1 -> i,
    so n rates describe a chain on n+1 states. The recurrence runs in log
    space with a final normalization, which keeps long chains with rho > 1
    away from overflow. A zero death rate on a reachable transition has no
    stationary solution and raises.
    """
    birth = np.asarray(birth_rates, dtype=float)
    death = np.asarray(death_rates, dtype=float)
    if birth.ndim != 1 or birth.shape != death.shape or birth.size < 1:
        raise ValueError("birth and death rate vectors must be 1-D and of equal length >= 1")
    if (birth < 0).any() or (death < 0).any():
        raise ValueError("rates must be non-negative")

    n = birth.size
    log_weights = np.full(n + 1, -np.inf)
    log_weights[0] = 0.0
    acc = 0.0
    for i in range(n):
        if birth[i] == 0.0:
            break  # states above i are unreachable
        if death[i] == 0.0:
            raise ValueError(
                f"death rate for transition {i + 1}->{i} is zero but state {i + 1} is reachable")
        acc += math.log(birth[i]) - math.log(death[i])
        log_weights[i + 1] = acc

    weights = np.exp(log_weights - log_weights.max())
    probabilities = weights / weights.sum()
    states = np.arange(n + 1)
    mean_population = float(states @ probabilities)
    throughput = float(probabilities[:-1] @ birth)
    return SteadyState(probabilities, mean_population, throughput)


def nsys_with_reneging(rho: float, renege_prob: float) -> float:
    """Mean number in system for the reneging-adjusted single-server queue."""
    if not 0.0 < rho < 1.0:
        raise ValueError(f"mean-population formula needs 0 < rho < 1, got {rho}")
    if not 0.0 <= renege_prob <= 1.0:
        raise ValueError(f"renege probability must lie in [0, 1], got {renege_prob!r}")
    return rho / (1.0 - rho) + renege_prob


def wq_with_reneging(rho: float, mu: float, renege_prob: float, lam_eff: float) -> float:
    """Mean queue wait (minutes) adjusted for reneging losses."""
    if not 0.0 < rho < 1.0:
        raise ValueError(f"wait formula needs 0 < rho < 1, got {rho}")
    if mu <= 0.0:
        raise ValueError(f"service rate must be positive, got {mu}")
    if not 0.0 <= renege_prob <= 1.0:
        raise ValueError(f"renege probability must lie in [0, 1], got {renege_prob!r}")
    base = rho / (mu * (1.0 - rho))
    if renege_prob == 0.0:
        return base
    if lam_eff <= 0.0:
        raise ValueError("effective arrival rate must be positive when reneging occurs")
    return base + renege_prob / lam_eff


def reneging_death_rates(mu: float, theta: float, capacity: int, servers: int = 1) -> np.ndarray:
    """Death-rate vector for a chain where waiting customers leave at rate theta.

    State n has min(n, servers) busy servers plus max(n - servers, 0) waiting
    customers, each abandoning at rate theta:
        death[n] = n*mu                      for n <= servers
        death[n] = servers*mu + (n-servers)*theta  for n >  servers
    Returns rates for transitions 1..capacity (length `capacity`).
    """
    if capacity < 1:
        raise ValueError(f"capacity must be >= 1, got {capacity}")
    if servers < 1:
        raise ValueError(f"server count must be >= 1, got {servers}")
    if mu <= 0.0 or theta < 0.0:
        raise ValueError("need mu > 0 and theta >= 0")
    rates = np.empty(capacity)
    for n in range(1, capacity + 1):
        busy = min(n, servers)
        waiting = n - busy
        rates[n - 1] = busy * mu + waiting * theta
    return rates


def exponential_reneging_rates(mu: float, alpha: float, capacity: int, servers: int = 1) -> np.ndarray:
    """Alternative abandonment model: rate exp(n * alpha / (servers * mu)).

    Exposed for experimentation; the defaults elsewhere use the linear
    `reneging_death_rates` form.
    """
    if capacity < 1:
        raise ValueError(f"capacity must be >= 1, got {capacity}")
    if servers < 1 or mu <= 0.0:
        raise ValueError("need servers >= 1 and mu > 0")
    rates = np.empty(capacity)
    for n in range(1, capacity + 1):
        busy = min(n, servers)
        rates[n - 1] = busy * mu
        if n > servers:
            rates[n - 1] += math.exp(n * alpha / (servers * mu))
    return rates


def mm1k_chain(lam: float, mu: float, k: int, theta: float = 0.0) -> SteadyState:
    """Steady state of the capacity-k single-server chain, optionally with
    waiting customers abandoning at rate theta."""
    if lam <= 0.0 or mu <= 0.0:
        raise ValueError("need lam > 0 and mu > 0")
    birth = np.full(k, lam)
    death = reneging_death_rates(mu, theta, k)
    return birth_death_steady_state(birth, death)
