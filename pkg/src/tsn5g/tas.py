"""802.1Qbv time-aware shaper.

A :class:`GateSchedule` is the cyclic gate control list: a base period and
a list of transmit windows, each opening a set of queues. A
:class:`TasPort` owns eight FIFO queues behind those gates and selects
frames by strict priority. A frame only starts if it can finish before
its gate closes (length-aware hold-back, i.e. the guard band).
"""

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Dict, FrozenSet, List, Optional, Tuple

from .core import ConfigError, Duration, Frame, Instant, NUM_QUEUES, serialization_time


class UnschedulableFrame(Exception):
    """The frame is longer than every transmit window of its queue."""


class GateState(Enum):
    OPEN = "open"
    CLOSED = "closed"


@dataclass(frozen=True)
class GateWindow:
    offset: Duration
    duration: Duration
    open_queues: FrozenSet[int]

    def __init__(self, offset, duration, open_queues):
        object.__setattr__(self, "offset", int(offset))
        object.__setattr__(self, "duration", int(duration))
        object.__setattr__(self, "open_queues", frozenset(open_queues))

    @property
    def end(self) -> Duration:
        return self.offset + self.duration


@dataclass(frozen=True)
class GateSchedule:
    base_period: Duration
    windows: Tuple[GateWindow, ...]
    epoch: Instant = 0

    def __init__(self, base_period, windows, epoch=0):
        object.__setattr__(self, "base_period", int(base_period))
        object.__setattr__(self, "windows", tuple(sorted(windows, key=lambda w: w.offset)))
        object.__setattr__(self, "epoch", int(epoch))

    def problems(self) -> List[ConfigError]:
        errs = []
        if self.base_period <= 0:
            errs.append(ConfigError("NonPositiveBasePeriod", str(self.base_period)))
            return errs
        for w in self.windows:
            if w.duration <= 0:
                errs.append(ConfigError("EmptyWindow", f"offset {w.offset}"))
            if w.offset < 0 or w.end > self.base_period:
                errs.append(ConfigError("WindowExceedsBasePeriod",
                                        f"window [{w.offset}, {w.end}) vs base {self.base_period}"))
            bad = [q for q in w.open_queues if not 0 <= q < NUM_QUEUES]
            if bad:
                errs.append(ConfigError("InvalidQueue", str(sorted(bad))))
        for a, b in zip(self.windows, self.windows[1:]):
            if b.offset < a.end:
                errs.append(ConfigError("OverlappingWindows",
                                        f"[{a.offset}, {a.end}) and [{b.offset}, {b.end})"))
        return errs

    def queues(self) -> FrozenSet[int]:
        return frozenset().union(*(w.open_queues for w in self.windows))

    @cached_property
    def _runs(self) -> Dict[int, List[Tuple[int, float]]]:
        # Per queue, maximal open intervals relative to cycle start. Adjacent
        # windows are merged; a run touching the cycle end continues into the
        # next cycle's first run. An always-open queue gets (0, inf).
        runs = {}
        for q in self.queues():
            merged = []
            for w in self.windows:
                if q not in w.open_queues:
                    continue
                if merged and merged[-1][1] == w.offset:
                    merged[-1][1] = w.end
                else:
                    merged.append([w.offset, w.end])
            if merged[0][0] == 0 and merged[-1][1] == self.base_period:
                if len(merged) == 1:
                    runs[q] = [(0, float("inf"))]
                    continue
                head = merged.pop(0)
                merged[-1][1] = self.base_period + head[1]
            runs[q] = [(s, e) for s, e in merged]
        return runs

    def max_open_run(self, queue: int) -> float:
        """Longest uninterrupted open time of ``queue``; 0 if never open."""
        return max((e - s for s, e in self._runs.get(queue, ())), default=0)


def gate_state(schedule: GateSchedule, queue: int, t: Instant) -> GateState:
    phase = (t - schedule.epoch) % schedule.base_period
    for w in schedule.windows:
        if queue in w.open_queues and w.offset <= phase < w.end:
            return GateState.OPEN
    return GateState.CLOSED


def is_open(schedule: GateSchedule, queue: int, t: Instant) -> bool:
    return gate_state(schedule, queue, t) is GateState.OPEN


def open_run_at(schedule: GateSchedule, queue: int, t: Instant):
    """Absolute ``(start, end)`` of the open run of ``queue`` containing ``t``, or None."""
    base = schedule.base_period
    cycle = (t - schedule.epoch) // base
    for c in (cycle - 1, cycle):
        origin = schedule.epoch + c * base
        for s, e in schedule._runs.get(queue, ()):
            if origin + s <= t < origin + e:
                return origin + s, origin + e
    return None


def fits_before_close(schedule: GateSchedule, queue: int, t: Instant, tx_time: Duration) -> bool:
    run = open_run_at(schedule, queue, t)
    if run is None:
        raise ValueError(f"gate of queue {queue} is closed at t={t}")
    return t + tx_time <= run[1]


def next_transmit_instant(schedule: GateSchedule, queue: int, t: Instant, tx_time: Duration) -> Instant:
    """Earliest ``t' >= t`` at which a frame of ``tx_time`` may start on ``queue``."""
    if queue not in schedule._runs or tx_time > schedule.max_open_run(queue):
        raise UnschedulableFrame(
            f"tx time {tx_time} ns exceeds every open window of queue {queue}")
    base = schedule.base_period
    cycle = (t - schedule.epoch) // base
    for c in range(cycle - 1, cycle + 2):
        origin = schedule.epoch + c * base
        for s, e in schedule._runs[queue]:
            start = max(t, origin + s)
            if start < origin + e and start + tx_time <= origin + e:
                return start
    raise AssertionError("unreachable: a fitting run exists within two cycles")


@dataclass
class TasPort:
    """Egress port with eight gated FIFO queues.

    ``capacity`` maps a queue to its tail-drop limit; queues not listed are
    unbounded.
    """

    schedule: GateSchedule
    link_rate_bps: int = 100_000_000
    include_overhead: bool = True
    capacity: Dict[int, int] = field(default_factory=dict)
    queues: List[deque] = field(default_factory=lambda: [deque() for _ in range(NUM_QUEUES)])
    busy_until: Instant = 0
    enqueued: int = 0
    dropped: int = 0
    egressed: int = 0

    def tx_time(self, frame: Frame) -> Duration:
        return serialization_time(frame.size_bytes, self.link_rate_bps, self.include_overhead)

    def enqueue(self, frame: Frame) -> bool:
        """Append to the frame's queue; False if tail-dropped."""
        q = self.queues[frame.queue]
        limit = self.capacity.get(frame.queue)
        if limit is not None and len(q) >= limit:
            self.dropped += 1
            return False
        q.append(frame)
        self.enqueued += 1
        return True

    def backlog(self) -> int:
        return sum(len(q) for q in self.queues)

    def dequeue_step(self, t: Instant) -> Optional[Tuple[Frame, Instant]]:
        if t < self.busy_until:
            return None
        for qid in range(NUM_QUEUES - 1, -1, -1):
            q = self.queues[qid]
            if not q or not is_open(self.schedule, qid, t):
                continue
            tx = self.tx_time(q[0])
            if fits_before_close(self.schedule, qid, t, tx):
                frame = q.popleft()
                self.busy_until = t + tx
                self.egressed += 1
                return frame, self.busy_until
        return None

    def next_wakeup(self, t: Instant) -> Optional[Instant]:
        """When the port could next start a head frame, ignoring the busy state."""
        best = None
        for qid, q in enumerate(self.queues):
            if not q:
                continue
            try:
                at = next_transmit_instant(self.schedule, qid, t, self.tx_time(q[0]))
            except UnschedulableFrame:
                # head-of-line blocked for good, e.g. best-effort with no window
                continue
            best = at if best is None else min(best, at)
        return best

