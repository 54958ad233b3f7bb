"""The charging-station state machine.

One Station owns one replication's queue, charger and counters, and
handles all events the engine dispatches: arrivals, patience expiries and
charge-phase completions. Four admission scenarios are supported:

* BlockingFC          -- join whenever the queue has room (forced balking only)
* ObservationFC       -- join iff the user's own wait assumption fits their patience
* InformedFC          -- join iff the station's estimated wait fits their patience
* Informed2PortCharge -- InformedFC admission on a two-mode two-port charger

The charger is power-limited to one concurrent fast session. A two-port
charger downgrades a session to the slow rate at the knee SoC, freeing
fast capacity for the other port; a single-port charger runs fast then
slow back to back for the same occupant.
"""

from __future__ import annotations

import enum
import math
from functools import partial
from typing import Optional

import numpy as np

from .agents import (ChargingProfile, Disposition, EvAgent, SamplingSettings,
                     UserType, assumed_wait, charge_time, sample_agent)
from .engine import (ARRIVAL, CHARGE_COMPLETE, END_OF_HORIZON,
                     FAST_PHASE_COMPLETE, PATIENCE_EXPIRY, Engine,
                     InvariantViolation, SimTime)
from .rng import ReplicationStreams


class ScenarioKind(enum.Enum):
    BLOCKING_FC = "BlockingFC"
    OBSERVATION_FC = "ObservationFC"
    INFORMED_FC = "InformedFC"
    INFORMED_2PORT = "Informed2PortCharge"

    @classmethod
    def from_name(cls, name: str) -> "ScenarioKind":
        for kind in cls:
            if kind.value == name:
                return kind
        raise ValueError(f"unknown scenario {name!r}; expected one of "
                         f"{[k.value for k in cls]}")


INFORMED_SCENARIOS = (ScenarioKind.INFORMED_FC, ScenarioKind.INFORMED_2PORT)


class AdmitDecision(enum.Enum):
    JOIN = "join"
    BALK_FORCED = "balk_forced"
    BALK_VOLUNTARY = "balk_voluntary"


class PortState(enum.Enum):
    IDLE = "idle"
    FAST = "fast"
    SLOW = "slow"


_IDLE = PortState.IDLE
_FAST = PortState.FAST
_SLOW = PortState.SLOW


class Port:
    __slots__ = ("pid", "state", "occupant", "phase_end", "event",
                 "fast_done_cb", "charge_done_cb")

    def __init__(self, pid: int):
        self.pid = pid
        self.state = PortState.IDLE
        self.occupant: Optional[EvAgent] = None
        self.phase_end: Optional[SimTime] = None
        self.event = None   # re-armed across phases; a port has at most one pending
        self.fast_done_cb = None
        self.charge_done_cb = None


class Charger:
    """1 or 2 ports behind a power budget of one concurrent fast session."""

    __slots__ = ("ports",)

    def __init__(self, n_ports: int):
        if n_ports not in (1, 2):
            raise ValueError(f"charger supports 1 or 2 ports, got {n_ports}")
        self.ports = tuple(Port(i + 1) for i in range(n_ports))

    def fast_eligible_port(self) -> Optional[Port]:
        """First idle port, but only while no port runs a fast session."""
        idle = None
        for port in self.ports:
            state = port.state
            if state is _FAST:
                return None
            if idle is None and state is _IDLE:
                idle = port
        return idle

    def fast_remaining(self, now: SimTime) -> float:
        for port in self.ports:
            if port.state is _FAST:
                return max(0.0, port.phase_end - now)
        return 0.0

    def occupied_count(self) -> int:
        return sum(1 for p in self.ports if p.state is not _IDLE)


class QueueEntry:
    __slots__ = ("agent", "entry_time", "timer", "threshold")

    def __init__(self, agent, entry_time, timer, threshold):
        self.agent = agent
        self.entry_time = entry_time
        self.timer = timer
        self.threshold = threshold


class ImpatientQueue:
    """Finite FIFO whose members may leave from any position."""

    __slots__ = ("capacity", "entries")

    def __init__(self, capacity: int):
        if capacity < 0:
            raise ValueError(f"queue capacity must be >= 0, got {capacity}")
        self.capacity = capacity
        self.entries: list[QueueEntry] = []

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def full(self) -> bool:
        return len(self.entries) >= self.capacity


class WqEstimator:
    """Running estimate of the mean realized queue wait, seeded at 0.

    "cumulative" keeps the all-time mean; "ewma" discounts old services
    with weight alpha per observation.
    """

    __slots__ = ("kind", "alpha", "value", "count")

    def __init__(self, kind: str = "cumulative", alpha: float = 0.2):
        if kind not in ("cumulative", "ewma"):
            raise ValueError(f"estimator kind must be 'cumulative' or 'ewma', got {kind!r}")
        if not 0.0 < alpha <= 1.0:
            raise ValueError(f"ewma alpha must lie in (0, 1], got {alpha}")
        self.kind = kind
        self.alpha = alpha
        self.value = 0.0
        self.count = 0

    def update(self, wait: float) -> None:
        self.count += 1
        if self.kind == "cumulative":
            self.value += (wait - self.value) / self.count
        else:
            self.value += self.alpha * (wait - self.value)


class _Ticket:
    """Attribute-free stand-in for an arrival in the reduced validation
    configuration: carries only the queue-lifecycle state the handlers
    touch, so a million arrivals do not pay for unused EV attributes."""

    __slots__ = ("patience_threshold", "queue_entry_time", "queue_wait",
                 "service_start", "disposition")

    uid = None

    def __init__(self):
        self.patience_threshold = math.inf
        self.disposition = Disposition.PENDING

    def settle(self, outcome: Disposition) -> None:
        if self.disposition is not Disposition.PENDING:
            raise RuntimeError(f"arrival already settled as {self.disposition}, got {outcome}")
        self.disposition = outcome


def estimated_wait(station: "Station") -> float:
    """Wait estimate the station shares with arrivals.

    Running mean queue wait times the queue length, plus what is left of
    the active fast session (zero when no port is fast charging: fast
    capacity is the resource the queue feeds).
    """
    return (station.wq.value * len(station.queue.entries)
            + station.charger.fast_remaining(station.engine.clock))


def admit_decision(scenario: ScenarioKind, agent: EvAgent, station: "Station") -> AdmitDecision:
    """Whether an arrival joins the queue, balks forced, or balks by choice.

    A full queue forces balking in every scenario, before any user
    attribute is consulted. BlockingFC admits everyone else. ObservationFC
    compares the user's own wait assumption against their patience;
    the informed scenarios compare the station's estimate instead.
    """
    if station.queue.full and station.charger.fast_eligible_port() is None:
        # With >= 1 waiting slot a full queue implies a busy charger; the
        # port check only matters for zero-slot validation setups.
        return AdmitDecision.BALK_FORCED
    if scenario is ScenarioKind.BLOCKING_FC:
        return AdmitDecision.JOIN
    if scenario is ScenarioKind.OBSERVATION_FC:
        s = station.sampling
        anticipated = assumed_wait(agent, len(station.queue.entries), station.n_sys,
                                   station.profile, s.soc_min, s.soc_max)
    else:
        anticipated = estimated_wait(station)
    if anticipated <= agent.patience_threshold:
        return AdmitDecision.JOIN
    return AdmitDecision.BALK_VOLUNTARY


class Station:
    """State and event handlers for one replication.

    `sampling=None` switches to the reduced validation configuration:
    arrivals carry no EV attributes, service times come from the
    exponential `service_rate`, and patience follows `patience_mode`
    ("infinite" or "exponential" with `patience_rate`).
    """

    __slots__ = (
        "engine", "streams", "scenario", "profile", "sampling", "lam", "horizon",
        "queue", "charger", "wq", "max_arrivals",
        "service_rate", "patience_mode", "patience_rate",
        "arrivals", "balked_forced", "balked_voluntary", "reneged", "served",
        "in_system_at_end", "_occupied", "max_queue_len",
        "serve_wait_sum", "serve_wait_count", "renege_wait_sum", "renege_wait_count",
        "record", "agents", "arrival_times", "enqueue_order", "service_start_order",
        "awt_trace", "ewt_trace", "trace",
        "_occupancy", "_occ_last",
    )

    def __init__(self, engine: Engine, streams: ReplicationStreams, *,
                 scenario: ScenarioKind, lam: float, horizon: SimTime,
                 queue_capacity: int,
                 profile: ChargingProfile = None,
                 sampling: Optional[SamplingSettings] = None,
                 wq_kind: str = "cumulative", wq_alpha: float = 0.2,
                 service_rate: Optional[float] = None,
                 patience_mode: str = "sampled", patience_rate: float = 0.0,
                 max_arrivals: Optional[int] = None,
                 record: bool = True,
                 track_occupancy: bool = False,
                 trace: Optional[list] = None):
        if lam <= 0.0:
            raise ValueError(f"arrival rate must be positive, got {lam}")
        if patience_mode not in ("sampled", "exponential", "infinite"):
            raise ValueError(f"unknown patience mode {patience_mode!r}")
        if patience_mode == "exponential" and patience_rate <= 0.0:
            raise ValueError("exponential patience needs a positive rate")
        if sampling is None and service_rate is None:
            raise ValueError("attribute-free arrivals need an exponential service rate")
        self.engine = engine
        self.streams = streams
        self.scenario = scenario
        self.profile = profile if profile is not None else ChargingProfile()
        self.sampling = sampling
        self.lam = lam
        self.horizon = horizon
        self.queue = ImpatientQueue(queue_capacity)
        self.charger = Charger(2 if scenario is ScenarioKind.INFORMED_2PORT else 1)
        for port in self.charger.ports:
            port.fast_done_cb = partial(self.on_fast_phase_complete, port)
            port.charge_done_cb = partial(self.on_charge_complete, port)
        self.wq = WqEstimator(wq_kind, wq_alpha)
        self.service_rate = service_rate
        self.patience_mode = patience_mode
        self.patience_rate = patience_rate
        self.max_arrivals = max_arrivals

        self.arrivals = 0
        self.balked_forced = 0
        self.balked_voluntary = 0
        self.reneged = 0
        self.served = 0
        self.in_system_at_end = 0
        self._occupied = 0
        self.max_queue_len = 0
        self.serve_wait_sum = 0.0
        self.serve_wait_count = 0
        self.renege_wait_sum = 0.0
        self.renege_wait_count = 0

        self.record = record
        self.agents: list[EvAgent] = []
        self.arrival_times: list[float] = []
        self.enqueue_order: list[int] = []
        self.service_start_order: list[int] = []
        self.awt_trace: list[tuple[float, float]] = []
        self.ewt_trace: list[tuple[float, float]] = []
        self.trace = trace

        if track_occupancy:
            self._occupancy = [0.0] * (queue_capacity + len(self.charger.ports) + 1)
        else:
            self._occupancy = None
        self._occ_last = 0.0

    # ---------------- derived state ----------------

    @property
    def n_sys(self) -> int:
        return len(self.queue.entries) + self._occupied

    @property
    def occupancy(self) -> Optional[np.ndarray]:
        """Time spent in each system-population state (minutes), if tracked."""
        return None if self._occupancy is None else np.asarray(self._occupancy)

    # ---------------- run control ----------------

    def start(self) -> None:
        """Schedule the first arrival of the Poisson stream."""
        first = self.streams.arrivals.exponential(self.lam)
        if first <= self.horizon:
            self._arrival_event = self.engine.schedule(first, ARRIVAL, self.on_arrival)

    def finalize(self, end_time: SimTime) -> None:
        """Close out the run: whoever is still waiting or charging stays
        'in system at end' (neither served nor reneged)."""
        self._mark(end_time)
        for entry in self.queue.entries:
            if entry.timer is not None:
                self.engine.cancel(entry.timer)
            entry.agent.settle(Disposition.IN_SYSTEM_AT_END)
            self.in_system_at_end += 1
        self.queue.entries.clear()
        for port in self.charger.ports:
            if port.occupant is not None:
                port.occupant.settle(Disposition.IN_SYSTEM_AT_END)
                self.in_system_at_end += 1
        if self.trace is not None:
            self._trace_row(end_time, END_OF_HORIZON, None, None)

    # ---------------- event handlers ----------------

    def on_arrival(self, now: SimTime) -> None:
        arrivals = self.arrivals + 1
        self.arrivals = arrivals
        uid = arrivals
        if self.max_arrivals is None or arrivals < self.max_arrivals:
            nxt = now + self.streams.arrivals.exponential(self.lam)
            if nxt <= self.horizon:
                # the arrival chain re-arms one event object
                self.engine.reschedule(self._arrival_event, nxt)

        if self.sampling is not None:
            agent = sample_agent(self.streams, self.sampling, self.profile, uid, now)
        elif not self.record:
            # reduced validation mode: blocking-only admission, inline
            queue = self.queue
            if (len(queue.entries) >= queue.capacity
                    and self.charger.fast_eligible_port() is None):
                self.balked_forced += 1
            else:
                self.enqueue(_Ticket(), now)
            return
        else:
            agent = EvAgent(uid=uid, arrival_time=now, soc_arrive=0.0,
                            target_soc=self.profile.knee_soc,
                            user_type=UserType.STANDARD,
                            impatience_factor=0.0, patience_threshold=math.inf)
        if self.record:
            self.agents.append(agent)
            self.arrival_times.append(now)
            if self.scenario in INFORMED_SCENARIOS:
                self.ewt_trace.append((now, estimated_wait(self)))
            elif self.scenario is ScenarioKind.OBSERVATION_FC and not self.queue.full:
                s = self.sampling
                self.awt_trace.append((now, assumed_wait(
                    agent, len(self.queue.entries), self.n_sys,
                    self.profile, s.soc_min, s.soc_max)))

        decision = admit_decision(self.scenario, agent, self)
        if decision is AdmitDecision.JOIN:
            self.enqueue(agent, now)
        elif decision is AdmitDecision.BALK_FORCED:
            agent.settle(Disposition.BALKED_FORCED)
            self.balked_forced += 1
        else:
            agent.settle(Disposition.BALKED_VOLUNTARY)
            self.balked_voluntary += 1
        if self.trace is not None:
            self._trace_row(now, ARRIVAL, uid, None)

    def enqueue(self, agent: EvAgent, now: SimTime):
        """Join the queue tail with the patience timer armed; offer service at once.

        An agent joining an empty queue while a fast start is possible goes
        straight to the port with zero wait (its timer would be voided in
        the same instant, so none is armed).
        """
        self._mark(now)
        agent.queue_entry_time = now
        if self.record:
            self.enqueue_order.append(agent.uid)
        if not self.queue.entries:
            port = self.charger.fast_eligible_port()
            if port is not None:
                self._start_service(agent, port, now)
                return None
        if self.queue.full:
            raise InvariantViolation("enqueue on a full queue; admission must gate capacity")
        if self.patience_mode == "sampled":
            threshold = agent.patience_threshold
        elif self.patience_mode == "exponential":
            threshold = self.streams.patience.exponential(self.patience_rate)
            agent.patience_threshold = threshold
        else:
            threshold = math.inf
        timer = None
        if threshold != math.inf:
            timer = self.engine.schedule(now + threshold, PATIENCE_EXPIRY,
                                         partial(self.on_patience_expiry, agent))
        self.queue.entries.append(QueueEntry(agent, now, timer, threshold))
        if len(self.queue.entries) > self.max_queue_len:
            self.max_queue_len = len(self.queue.entries)
        return timer

    def on_patience_expiry(self, agent: EvAgent, now: SimTime) -> None:
        """The agent leaves from its current queue position; later entries advance."""
        entries = self.queue.entries
        for i, entry in enumerate(entries):
            if entry.agent is agent:
                break
        else:
            raise InvariantViolation(
                f"patience expiry for agent {agent.uid} not in queue (stale timer)")
        self._mark(now)
        del entries[i]
        agent.queue_wait = entry.threshold  # waited exactly the threshold
        agent.settle(Disposition.RENEGED)
        self.reneged += 1
        self.renege_wait_sum += entry.threshold
        self.renege_wait_count += 1
        if self.trace is not None:
            self._trace_row(now, PATIENCE_EXPIRY, agent.uid, None)

    def on_fast_phase_complete(self, port: Port, now: SimTime) -> None:
        """Occupant reached the knee: continue slow, or finish if that was the target.
        Either way fast capacity frees and the queue head is offered service."""
        agent = port.occupant
        if agent.target_soc > self.profile.knee_soc:
            port.state = PortState.SLOW
            port.phase_end = now + charge_time(self.profile, self.profile.knee_soc,
                                               agent.target_soc)
            self.engine.schedule(port.phase_end, CHARGE_COMPLETE, port.charge_done_cb)
            self._try_dispatch(now)
        else:
            self._finish_service(port, now)
        if self.trace is not None:
            self._trace_row(now, FAST_PHASE_COMPLETE, agent.uid, port.pid)

    def on_charge_complete(self, port: Port, now: SimTime) -> None:
        agent = port.occupant
        self._finish_service(port, now)
        if self.trace is not None:
            self._trace_row(now, CHARGE_COMPLETE, agent.uid, port.pid)

    # ---------------- internals ----------------

    def _try_dispatch(self, now: SimTime) -> None:
        """Pull the queue head into service while a fast start is possible."""
        entries = self.queue.entries
        while entries:
            port = self.charger.fast_eligible_port()
            if port is None:
                return
            entry = entries.pop(0)
            if entry.timer is not None:
                self.engine.cancel(entry.timer)
            self._start_service(entry.agent, port, now)

    def _start_service(self, agent: EvAgent, port: Port, now: SimTime) -> None:
        if any(p.state is PortState.FAST for p in self.charger.ports):
            raise InvariantViolation("second concurrent fast session requested")
        agent.queue_wait = now - agent.queue_entry_time
        agent.service_start = now
        self.serve_wait_sum += agent.queue_wait
        self.serve_wait_count += 1
        if self.record:
            self.service_start_order.append(agent.uid)
        port.occupant = agent
        port.state = PortState.FAST
        self._occupied += 1
        if self.service_rate is not None:
            # reduced validation mode: one exponential phase, no knee
            duration = self.streams.service.exponential(self.service_rate)
            port.phase_end = now + duration
            self.engine.schedule(port.phase_end, CHARGE_COMPLETE, port.charge_done_cb)
        else:
            duration = charge_time(self.profile, agent.soc_arrive, self.profile.knee_soc)
            port.phase_end = now + duration
            self.engine.schedule(port.phase_end, FAST_PHASE_COMPLETE, port.fast_done_cb)

    def _finish_service(self, port: Port, now: SimTime) -> None:
        agent = port.occupant
        self._mark(now)
        agent.settle(Disposition.SERVED)
        self.served += 1
        self.wq.update(agent.queue_wait)
        port.state = PortState.IDLE
        port.occupant = None
        port.phase_end = None
        self._occupied -= 1
        self._try_dispatch(now)

    def _mark(self, now: SimTime) -> None:
        occ = self._occupancy
        if occ is not None:
            occ[len(self.queue.entries) + self._occupied] += now - self._occ_last
            self._occ_last = now

    def _trace_row(self, now, kind, agent_uid, port_id) -> None:
        self.trace.append((now, kind, agent_uid, port_id,
                           len(self.queue.entries), self.n_sys))
