"""Deterministic discrete-event kernel and end-to-end wiring.

end station -> gateway (classify, TAS egress) -> 5G bridge -> core

Events run in ``(at, seq)`` order; ``seq`` is an insertion counter, so
simultaneous events execute in the order they were scheduled. Given the
same scenario and seed, the execution order, and so every capture, is
identical.
"""

import heapq
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Dict, List, NamedTuple, Optional, Tuple, Union

import numpy as np

from .core import (ConfigError, Duration, Frame, Instant, MIN_FRAME_BYTES, NS_PER_S,
                   ObservationPoint, PATH_ORDER, TIME_LIMIT)
from .fiveg import RTT_MAX, Bridge, BridgeModel
from .gateway import Gateway, GatewayConfig, validate


@dataclass(frozen=True)
class Periodic:
    period: Duration
    frame_size: int
    count: int
    phase: Duration = 0


@dataclass(frozen=True)
class ConstantBitrate:
    """Frames at the nominal spacing of ``bitrate_bps``, each moved by a
    uniform offset in ``[-jitter, +jitter]``. Stops at ``duration``."""

    bitrate_bps: int
    frame_size: int
    duration: Duration
    jitter: Duration = 0
    start: Instant = 0

    def nominal_spacing(self) -> float:
        return self.frame_size * 8 * NS_PER_S / self.bitrate_bps


TrafficSpec = Union[Periodic, ConstantBitrate]


@dataclass(frozen=True)
class TrafficSource:
    spec: TrafficSpec
    dst: str


def traffic_problems(spec: TrafficSpec, mtu: int) -> List[ConfigError]:
    errs = []
    if not MIN_FRAME_BYTES <= spec.frame_size <= mtu:
        errs.append(ConfigError("InvalidFrameSize", f"{spec.frame_size} not in [64, {mtu}]"))
    if isinstance(spec, Periodic):
        if spec.period <= 0:
            errs.append(ConfigError("InvalidTraffic", f"period {spec.period}"))
        if spec.count < 0 or spec.phase < 0:
            errs.append(ConfigError("InvalidTraffic", "count and phase must be >= 0"))
    else:
        if spec.bitrate_bps <= 0:
            errs.append(ConfigError("InvalidTraffic", f"bitrate {spec.bitrate_bps}"))
        elif spec.jitter < 0 or spec.jitter >= spec.nominal_spacing():
            errs.append(ConfigError("InvalidTraffic",
                                    f"jitter {spec.jitter} must be below the frame spacing"))
        if spec.duration < 0 or spec.start < 0:
            errs.append(ConfigError("InvalidTraffic", "duration and start must be >= 0"))
    return errs


def generate(spec: TrafficSpec, rng: np.random.Generator) -> List[Tuple[Instant, int]]:
    """Arrival instants and frame sizes, sorted by time."""
    if isinstance(spec, Periodic):
        return [(spec.phase + k * spec.period, spec.frame_size) for k in range(spec.count)]
    bits = spec.frame_size * 8
    out = []
    k = 0
    while True:
        # floor of the exact rational offset; no accumulated rounding drift
        nominal = k * bits * NS_PER_S // spec.bitrate_bps
        if nominal >= spec.duration:
            break
        wobble = int(rng.integers(-spec.jitter, spec.jitter, endpoint=True)) if spec.jitter else 0
        out.append((max(0, spec.start + nominal + wobble), spec.frame_size))
        k += 1
    out.sort(key=lambda a: a[0])
    return out


class Action(IntEnum):
    FRAME_ARRIVAL = 0
    GATE_EDGE = 1
    EGRESS_COMPLETE = 2
    BRIDGE_DELIVERY = 3


class Event(NamedTuple):
    at: Instant
    seq: int
    action: Action
    payload: object = None


class CaptureRecord(NamedTuple):
    seq: int
    stream: Optional[str]
    t: Instant
    size_bytes: int


@dataclass
class CaptureSet:
    records: Dict[ObservationPoint, List[CaptureRecord]] = field(
        default_factory=lambda: {p: [] for p in PATH_ORDER})

    def at(self, point: ObservationPoint) -> List[CaptureRecord]:
        return self.records[point]

    def seqs(self, point: ObservationPoint) -> List[int]:
        return sorted(r.seq for r in self.records[point])

    def __len__(self):
        return sum(len(v) for v in self.records.values())


@dataclass
class Counters:
    generated: int = 0
    egressed: int = 0
    delivered: int = 0
    dropped_gateway: int = 0
    dropped_bridge: int = 0
    queued_at_horizon: int = 0
    in_flight_at_horizon: int = 0


@dataclass
class AnalysisSettings:
    """How a run is judged. ``None`` means derive from the scenario."""

    expected_period: Optional[Duration] = None
    tol: Optional[Duration] = None
    d_max: Duration = RTT_MAX
    cv_threshold: float = 0.05
    point: ObservationPoint = ObservationPoint.CORE_ARRIVAL


@dataclass
class ScenarioConfig:
    name: str
    seed: int
    horizon: Duration
    sources: List[TrafficSource]
    gateway: GatewayConfig
    bridge: BridgeModel
    analysis: AnalysisSettings = field(default_factory=AnalysisSettings)

    def problems(self) -> List[ConfigError]:
        errs = validate(self.gateway) + self.bridge.problems()
        if not 0 < self.horizon < TIME_LIMIT:
            errs.append(ConfigError("InvalidHorizon", str(self.horizon)))
        if self.seed < 0:
            errs.append(ConfigError("InvalidSeed", str(self.seed)))
        for src in self.sources:
            errs.extend(traffic_problems(src.spec, self.gateway.mtu))
        return errs

    @property
    def expected_period(self) -> Duration:
        return self.analysis.expected_period or self.gateway.schedule.base_period

    @property
    def tolerance(self) -> Duration:
        if self.analysis.tol is not None:
            return self.analysis.tol
        low, high = self.bridge.delay.bounds()
        return high - low


class InvalidScenario(ValueError):
    def __init__(self, errors: List[ConfigError]):
        self.errors = errors
        super().__init__("; ".join(str(e) for e in errors))


@dataclass
class SimResult:
    captures: CaptureSet
    counters: Counters
    # frames that had left the gateway but not reached the core at the horizon
    in_flight: List[int] = field(default_factory=list)
    # frames still waiting in a gateway queue at the horizon
    queued: List[int] = field(default_factory=list)


class Simulation:
    def __init__(self, scenario: ScenarioConfig):
        errs = scenario.problems()
        if errs:
            raise InvalidScenario(errs)
        self.scenario = scenario
        traffic_seed, bridge_seed = np.random.SeedSequence(scenario.seed).spawn(2)
        self.gateway = Gateway(scenario.gateway)
        self.bridge = Bridge(scenario.bridge, np.random.default_rng(bridge_seed))
        self.arrivals = self._arrivals(np.random.default_rng(traffic_seed))
        self.captures = CaptureSet()
        self.counters = Counters()
        self.now: Instant = 0
        self._heap: List[Event] = []
        self._seq = 0
        self._wakeups = set()
        self._in_flight: Dict[int, Frame] = {}

    def _arrivals(self, rng):
        merged = []
        for idx, src in enumerate(self.scenario.sources):
            for t, size in generate(src.spec, rng):
                if t < self.scenario.horizon:
                    merged.append((t, idx, size, src.dst))
        merged.sort(key=lambda a: (a[0], a[1]))
        return merged

    def schedule(self, at: Instant, action: Action, payload=None):
        if at < self.now:
            raise AssertionError(f"causality: event at {at} scheduled from {self.now}")
        heapq.heappush(self._heap, Event(at, self._seq, action, payload))
        self._seq += 1

    def _record(self, point, frame, t):
        self.captures.records[point].append(CaptureRecord(frame.seq, frame.stream, t,
                                                          frame.size_bytes))

    def run(self) -> SimResult:
        horizon = self.scenario.horizon
        if self.arrivals:
            self.schedule(self.arrivals[0][0], Action.FRAME_ARRIVAL, 0)
        handlers = {
            Action.FRAME_ARRIVAL: self._on_arrival,
            Action.GATE_EDGE: self._on_gate_edge,
            Action.EGRESS_COMPLETE: self._on_egress_complete,
            Action.BRIDGE_DELIVERY: self._on_delivery,
        }
        while self._heap and self._heap[0].at < horizon:
            ev = heapq.heappop(self._heap)
            self.now = ev.at
            handlers[ev.action](ev)
        c = self.counters
        c.dropped_gateway = self.gateway.dropped
        c.dropped_bridge = self.bridge.dropped
        c.queued_at_horizon = self.gateway.port.backlog()
        c.in_flight_at_horizon = len(self._in_flight)
        queued = sorted(f.seq for q in self.gateway.port.queues for f in q)
        return SimResult(self.captures, c, sorted(self._in_flight), queued)

    def _on_arrival(self, ev):
        idx = ev.payload
        t, _, size, dst = self.arrivals[idx]
        if idx + 1 < len(self.arrivals):
            self.schedule(self.arrivals[idx + 1][0], Action.FRAME_ARRIVAL, idx + 1)
        frame = Frame(seq=idx, size_bytes=size, created_at=t, dst=dst)
        self.counters.generated += 1
        queued = self.gateway.ingest(frame, t)
        self._record(ObservationPoint.GATEWAY_INGRESS, queued or frame, t)
        if queued is not None:
            self._service(t)

    def _on_gate_edge(self, ev):
        self._wakeups.discard(ev.at)
        self._service(ev.at)

    def _on_egress_complete(self, ev):
        self._service(ev.at)

    def _on_delivery(self, ev):
        frame = ev.payload
        del self._in_flight[frame.seq]
        self.bridge.deliver(frame, ev.at)
        self.counters.delivered += 1
        self._record(ObservationPoint.CORE_ARRIVAL, frame, ev.at)

    def _service(self, t):
        if t < self.gateway.port.busy_until:
            return
        out = self.gateway.transmit(t)
        if out is None:
            wake = self.gateway.next_wakeup(t)
            if wake is not None and wake not in self._wakeups:
                self._wakeups.add(wake)
                self.schedule(wake, Action.GATE_EDGE)
            return
        frame, done = out
        self.counters.egressed += 1
        self._record(ObservationPoint.GATEWAY_EGRESS, frame, t)
        self.schedule(done, Action.EGRESS_COMPLETE)
        arrival = self.bridge.transit(frame, t)
        if arrival is not None:
            self._in_flight[frame.seq] = frame
            self.schedule(arrival, Action.BRIDGE_DELIVERY, frame)


def run(scenario: ScenarioConfig) -> SimResult:
    return Simulation(scenario).run()
