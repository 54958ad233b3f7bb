"""EV + user agents: battery charging physics, patience, and the
user-type wait assumptions arriving drivers make.

Charging is piecewise linear in state of charge: a fast rate up to the
knee (where DC fast charging tapers off) and a slow rate above it. The
default profile is anchored to a 40.5 kWh vehicle that fast-charges
10% -> 80% in 56 minutes and takes about as long again for the last 20%.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

from .engine import SimTime
from .rng import ReplicationStreams


class UserType(enum.Enum):
    PESSIMIST = "pessimist"
    STANDARD = "standard"
    OPTIMIST = "optimist"


USER_TYPES = (UserType.PESSIMIST, UserType.STANDARD, UserType.OPTIMIST)


class Disposition(enum.Enum):
    """Terminal outcome of one arriving agent. Set once, from PENDING."""

    PENDING = "pending"
    BALKED_FORCED = "balked_forced"
    BALKED_VOLUNTARY = "balked_voluntary"
    RENEGED = "reneged"
    SERVED = "served"
    IN_SYSTEM_AT_END = "in_system_at_end"


@dataclass(frozen=True)
class ChargingProfile:
    battery_kwh: float = 40.5
    fast_rate: float = 1.25       # SoC percent per minute below the knee
    slow_rate: float = 0.3125     # SoC percent per minute above the knee
    knee_soc: float = 80.0        # where the charger drops to the slow rate

    def __post_init__(self):
        if not self.fast_rate > self.slow_rate > 0.0:
            raise ValueError(
                f"need fast_rate > slow_rate > 0, got {self.fast_rate} and {self.slow_rate}")
        if not 0.0 < self.knee_soc < 100.0:
            raise ValueError(f"knee_soc must lie in (0, 100), got {self.knee_soc}")


DEFAULT_PROFILE = ChargingProfile()


def charge_time(profile: ChargingProfile, soc_from: float, soc_to: float) -> float:
    """Minutes to charge from soc_from to soc_to (percent).

    Fast rate below the knee, slow rate above, additive across it.
    """
    if not 0.0 <= soc_from <= soc_to <= 100.0:
        raise ValueError(
            f"need 0 <= soc_from <= soc_to <= 100, got {soc_from} and {soc_to}")
    knee = profile.knee_soc
    fast_span = min(soc_to, knee) - min(soc_from, knee)
    slow_span = max(soc_to, knee) - max(soc_from, knee)
    return fast_span / profile.fast_rate + slow_span / profile.slow_rate


def patience_threshold(profile: ChargingProfile, soc_arrive: float,
                       impatience_factor: float,
                       target_soc: Optional[float] = None) -> float:
    """Maximum queue wait (minutes) the user tolerates.

    The threshold is the impatience factor times the charge time still
    needed, by default up to the knee; lower initial charge means a longer
    tolerated wait. Arrivals already at or past the target need no fast
    charge and get zero patience (out-of-model inputs fail safe).
    """
    if impatience_factor < 0.0:
        raise ValueError(f"impatience factor must be >= 0, got {impatience_factor}")
    target = profile.knee_soc if target_soc is None else target_soc
    if soc_arrive >= target:
        return 0.0
    return impatience_factor * charge_time(profile, soc_arrive, target)


@dataclass(slots=True)
class EvAgent:
    uid: int
    arrival_time: SimTime
    soc_arrive: float
    target_soc: float
    user_type: UserType
    impatience_factor: float
    patience_threshold: float
    queue_entry_time: Optional[SimTime] = None
    queue_wait: Optional[float] = None
    service_start: Optional[SimTime] = None
    disposition: Disposition = Disposition.PENDING

    def settle(self, outcome: Disposition) -> None:
        """One-shot transition out of PENDING."""
        if self.disposition is not Disposition.PENDING:
            raise RuntimeError(
                f"agent {self.uid} already settled as {self.disposition}, got {outcome}")
        self.disposition = outcome


def assumed_wait(agent: EvAgent, n_queue: int, n_sys: int, profile: ChargingProfile,
                 soc_min: float = 5.0, soc_max: float = 60.0) -> float:
    """The arriving user's own wait estimate from observing the station.

    Pessimists price everyone in the system at the worst-case charge time
    (minimum arrival SoC); standard users use their own remaining fast
    charge times the queue length; optimists the best case (maximum
    arrival SoC) times the queue length.
    """
    if n_queue < 0 or n_sys < 0:
        raise ValueError("counts must be >= 0")
    if agent.user_type is UserType.PESSIMIST:
        return charge_time(profile, soc_min, profile.knee_soc) * n_sys
    if agent.user_type is UserType.STANDARD:
        return charge_time(profile, min(agent.soc_arrive, profile.knee_soc), profile.knee_soc) * n_queue
    return charge_time(profile, soc_max, profile.knee_soc) * n_queue


@dataclass(frozen=True)
class SamplingSettings:
    """How arriving agents are drawn. Weights are cumulative-ready fractions."""

    soc_min: float = 5.0
    soc_max: float = 60.0
    user_type_weights: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    impatience_factor: float = 0.6
    stop_at_knee_fraction: float = 0.0   # share of users whose target is the knee
    patience_target: str = "knee"        # "knee" or "target"
    cumulative_weights: tuple[float, ...] = field(init=False)

    def __post_init__(self):
        if not 0.0 <= self.soc_min < self.soc_max:
            raise ValueError(
                f"need 0 <= soc_min < soc_max, got [{self.soc_min}, {self.soc_max}]")
        w = self.user_type_weights
        if len(w) != 3 or any(x < 0 for x in w):
            raise ValueError(f"user type mix needs three non-negative weights, got {w}")
        total = sum(w)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"user type mix must sum to 1, got {total}")
        if not 0.0 <= self.stop_at_knee_fraction <= 1.0:
            raise ValueError(
                f"stop-at-knee fraction must lie in [0, 1], got {self.stop_at_knee_fraction}")
        if self.patience_target not in ("knee", "target"):
            raise ValueError(f"patience_target must be 'knee' or 'target', got {self.patience_target!r}")
        acc, cum = 0.0, []
        for x in w:
            acc += x
            cum.append(acc)
        cum[-1] = 1.0
        object.__setattr__(self, "cumulative_weights", tuple(cum))


def sample_agent(streams: ReplicationStreams, settings: SamplingSettings,
                 profile: ChargingProfile, uid: int, arrival_time: SimTime) -> EvAgent:
    """Draw one arriving agent.

    Consumes exactly one draw from each of the initial-SoC, user-type and
    target streams per call, so agent attributes stay identical across
    scenario comparisons on common random numbers.
    """
    soc = streams.initial_soc.uniform(settings.soc_min, settings.soc_max)
    user_type = USER_TYPES[streams.user_type.pick(settings.cumulative_weights)]
    stops_at_knee = streams.target_soc.unit() < settings.stop_at_knee_fraction
    target = profile.knee_soc if stops_at_knee else 100.0
    patience_soc = None if settings.patience_target == "knee" else target
    threshold = patience_threshold(profile, soc, settings.impatience_factor, patience_soc)
    return EvAgent(uid=uid, arrival_time=arrival_time, soc_arrive=soc,
                   target_soc=target, user_type=user_type,
                   impatience_factor=settings.impatience_factor,
                   patience_threshold=threshold)
