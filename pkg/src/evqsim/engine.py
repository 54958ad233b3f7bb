"""Deterministic discrete-event core: clock, calendar, cancellable events.

One engine drives one replication. Events are totally ordered by
(time, seq), where seq is the order of scheduling, so simultaneous events
dispatch in the order they were created. Cancelled events are skipped
lazily when popped and are never dispatched.
"""

from __future__ import annotations

import heapq
from typing import Callable, Optional

SimTime = float

# Event kinds (trace vocabulary; `seq` disambiguates within a timestamp).
ARRIVAL = "arrival"
PATIENCE_EXPIRY = "patience_expiry"
FAST_PHASE_COMPLETE = "fast_phase_complete"
CHARGE_COMPLETE = "charge_complete"
END_OF_HORIZON = "end_of_horizon"

_PENDING = 0
_CANCELLED = 1
_DISPATCHED = 2


class SchedulingError(RuntimeError):
    """Misuse of the calendar: past timestamps, foreign or spent handles."""


class InvariantViolation(RuntimeError):
    """A structural invariant of the simulation broke mid-run."""


class Event:
    """A scheduled occurrence; also serves as its own cancellation handle."""

    __slots__ = ("time", "seq", "kind", "action", "state", "owner")

    def __init__(self, time: SimTime, seq: int, kind: str,
                 action: Optional[Callable[[SimTime], None]], owner: "EventCalendar"):
        self.time = time
        self.seq = seq
        self.kind = kind
        self.action = action
        self.state = _PENDING
        self.owner = owner

    @property
    def cancelled(self) -> bool:
        return self.state == _CANCELLED

    @property
    def dispatched(self) -> bool:
        return self.state == _DISPATCHED

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        tag = {_PENDING: "pending", _CANCELLED: "cancelled", _DISPATCHED: "dispatched"}[self.state]
        return f"Event(t={self.time:g}, seq={self.seq}, kind={self.kind}, {tag})"


class EventCalendar:
    """Pending events in a binary heap keyed by (time, seq)."""

    __slots__ = ("_heap", "_next_seq")

    def __init__(self) -> None:
        self._heap: list[tuple[SimTime, int, Event]] = []
        self._next_seq = 0

    def __len__(self) -> int:
        return len(self._heap)

    def schedule(self, time: SimTime, kind: str,
                 action: Optional[Callable[[SimTime], None]] = None) -> Event:
        seq = self._next_seq
        self._next_seq = seq + 1
        event = Event(time, seq, kind, action, self)
        heapq.heappush(self._heap, (time, seq, event))
        return event

    def cancel(self, event: Event) -> None:
        """Mark an event so it is never dispatched. Idempotent.

        Cancelling an event from another calendar, or one that already
        dispatched, is a programming error.
        """
        if event.owner is not self:
            raise SchedulingError("cancel() got a handle from a different calendar")
        if event.state == _DISPATCHED:
            raise SchedulingError(f"cannot cancel already-dispatched {event!r}")
        event.state = _CANCELLED

    def next_time(self) -> Optional[SimTime]:
        """Timestamp of the earliest pending (non-cancelled) event, if any."""
        heap = self._heap
        while heap:
            if heap[0][2].state == _CANCELLED:
                heapq.heappop(heap)
            else:
                return heap[0][0]
        return None


class Engine:
    """Event loop with a monotone clock.

    Handlers run synchronously, one at a time; anything they schedule must
    not precede the current clock. `dispatch_hook`, when set, is called
    after each handled event (used for trace capture).
    """

    __slots__ = ("clock", "calendar", "dispatched_count", "dispatch_hook")

    def __init__(self) -> None:
        self.clock: SimTime = 0.0
        self.calendar = EventCalendar()
        self.dispatched_count = 0
        self.dispatch_hook: Optional[Callable[[Event, SimTime], None]] = None

    def schedule(self, time: SimTime, kind: str,
                 action: Optional[Callable[[SimTime], None]] = None) -> Event:
        if time < self.clock:
            raise SchedulingError(
                f"event {kind!r} scheduled at t={time:g}, before clock t={self.clock:g}")
        # calendar.schedule inlined: this runs for every event
        calendar = self.calendar
        seq = calendar._next_seq
        calendar._next_seq = seq + 1
        event = Event(time, seq, kind, action, calendar)
        heapq.heappush(calendar._heap, (time, seq, event))
        return event

    def cancel(self, event: Event) -> None:
        self.calendar.cancel(event)

    def reschedule(self, event: Event, time: SimTime,
                   kind: Optional[str] = None,
                   action: Optional[Callable[[SimTime], None]] = None) -> Event:
        """Re-arm a dispatched or cancelled event as a fresh occurrence.

        The object is reused but gets a new seq, so ordering and the
        once-dispatched-or-cancelled accounting behave exactly as if a new
        event had been scheduled. Recurring timers (arrival chains, port
        phases) use this to avoid one allocation per occurrence.
        """
        if event.owner is not self.calendar:
            raise SchedulingError("reschedule() got a handle from a different calendar")
        if event.state == _PENDING:
            raise SchedulingError(f"cannot re-arm {event!r} while it is still pending")
        if time < self.clock:
            raise SchedulingError(
                f"event re-armed at t={time:g}, before clock t={self.clock:g}")
        calendar = self.calendar
        seq = calendar._next_seq
        calendar._next_seq = seq + 1
        event.time = time
        event.seq = seq
        event.state = _PENDING
        if kind is not None:
            event.kind = kind
        if action is not None:
            event.action = action
        heapq.heappush(calendar._heap, (time, seq, event))
        return event

    def run_until(self, horizon: SimTime) -> int:
        """Dispatch every pending event with time <= horizon, in order.

        Leaves the clock at `horizon` and returns the number of events
        dispatched (cancelled events do not count).
        """
        if horizon < self.clock:
            raise SchedulingError(f"horizon {horizon:g} precedes clock {self.clock:g}")
        count = self._drain(horizon)
        self.clock = horizon
        return count

    def run_all(self) -> int:
        """Dispatch until the calendar drains; clock stops at the last event."""
        return self._drain(None)

    def _drain(self, horizon: Optional[SimTime]) -> int:
        heap = self.calendar._heap
        hook = self.dispatch_hook
        pop = heapq.heappop
        count = 0
        event = None
        try:
            while heap:
                time = heap[0][0]
                if horizon is not None and time > horizon:
                    break
                event = pop(heap)[2]
                if event.state == _CANCELLED:
                    continue
                event.state = _DISPATCHED
                self.clock = time
                action = event.action
                if action is not None:
                    action(time)
                if hook is not None:
                    hook(event, time)
                count += 1
        except Exception as exc:
            self.dispatched_count += count
            raise InvariantViolation(
                f"handler failed at t={self.clock:g} for {event!r}") from exc
        self.dispatched_count += count
        return count
