"""TSN gateway: stream translation, VLAN tagging, queue assignment and a
TAS-shaped egress port.

The non-TSN ingress side is instantaneous; all queueing happens at the
shaped egress.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .core import (BEST_EFFORT_QUEUE, ConfigError, DEFAULT_MTU, MIN_FRAME_BYTES, NUM_QUEUES,
                   Frame, Instant, ObservationPoint, serialization_time)
from .tas import GateSchedule, TasPort


@dataclass(frozen=True)
class StreamRule:
    dst_address: str
    stream: str
    vlan_id: int
    pcp: int
    queue: int

    def matches(self, frame: Frame) -> bool:
        return frame.dst == self.dst_address


@dataclass
class GatewayConfig:
    rules: List[StreamRule]
    schedule: GateSchedule
    link_rate_bps: int = 100_000_000
    mtu: int = DEFAULT_MTU
    best_effort_queue: int = BEST_EFFORT_QUEUE
    include_overhead: bool = True
    # per-queue tail-drop limit; absent means unbounded
    queue_capacity: Dict[int, int] = field(default_factory=dict)


def classify(config: GatewayConfig, frame: Frame) -> Frame:
    """Tag ``frame`` from the first matching rule, else mark it best-effort."""
    for rule in config.rules:
        if rule.matches(frame):
            return frame.tagged(stream=rule.stream, pcp=rule.pcp, vlan=rule.vlan_id,
                                queue=rule.queue)
    return frame.tagged(stream=None, pcp=None, vlan=None, queue=config.best_effort_queue)


def validate(config: GatewayConfig) -> List[ConfigError]:
    schedule_errs = config.schedule.problems()
    errs = list(schedule_errs)
    if config.link_rate_bps <= 0:
        errs.append(ConfigError("ZeroLinkRate", str(config.link_rate_bps)))
    if config.mtu < MIN_FRAME_BYTES:
        errs.append(ConfigError("InvalidMtu", str(config.mtu)))
    if not 0 <= config.best_effort_queue < NUM_QUEUES:
        errs.append(ConfigError("InvalidQueue", f"best-effort queue {config.best_effort_queue}"))
    for q, cap in config.queue_capacity.items():
        if cap < 1:
            errs.append(ConfigError("InvalidCapacity", f"queue {q}: {cap}"))

    seen = set()
    for rule in config.rules:
        if rule.stream in seen:
            errs.append(ConfigError("DuplicateStream", rule.stream))
        seen.add(rule.stream)
        if not 1 <= rule.vlan_id <= 4094:
            errs.append(ConfigError("InvalidVlan", f"{rule.stream}: {rule.vlan_id}"))
        if not 0 <= rule.pcp <= 7:
            errs.append(ConfigError("InvalidPcp", f"{rule.stream}: {rule.pcp}"))
        if not 0 <= rule.queue < NUM_QUEUES:
            errs.append(ConfigError("InvalidQueue", f"{rule.stream}: {rule.queue}"))
        if rule.queue == config.best_effort_queue:
            errs.append(ConfigError("StreamOnBestEffortQueue", f"{rule.stream}: {rule.queue}"))

    open_queues = config.schedule.queues()
    mtu_tx = None
    if config.link_rate_bps > 0 and config.mtu >= MIN_FRAME_BYTES:
        mtu_tx = serialization_time(config.mtu, config.link_rate_bps, config.include_overhead)
    for q in sorted({r.queue for r in config.rules}):
        if q not in open_queues:
            errs.append(ConfigError("QueueNeverOpen", str(q)))
        elif (not schedule_errs and mtu_tx is not None
              and mtu_tx > config.schedule.max_open_run(q)):
            errs.append(ConfigError("FrameExceedsWindow",
                                    f"queue {q}: MTU needs {mtu_tx} ns"))
    return errs


class Gateway:
    """Runtime state of one gateway: classification plus the shaped port."""

    def __init__(self, config: GatewayConfig):
        self.config = config
        self.port = TasPort(config.schedule, link_rate_bps=config.link_rate_bps,
                            include_overhead=config.include_overhead,
                            capacity=dict(config.queue_capacity))

    @property
    def dropped(self) -> int:
        return self.port.dropped

    def ingest(self, frame: Frame, t: Instant) -> Optional[Frame]:
        """Stamp, classify and enqueue; returns the queued frame or None if dropped."""
        if not MIN_FRAME_BYTES <= frame.size_bytes <= self.config.mtu:
            raise ValueError(f"frame of {frame.size_bytes} B outside [{MIN_FRAME_BYTES}, "
                             f"{self.config.mtu}]")
        frame.stamp(ObservationPoint.GATEWAY_INGRESS, t)
        tagged = classify(self.config, frame)
        return tagged if self.port.enqueue(tagged) else None

    def transmit(self, t: Instant) -> Optional[Tuple[Frame, Instant]]:
        """Start the next eligible frame at ``t``; stamps its egress tap."""
        out = self.port.dequeue_step(t)
        if out is not None:
            out[0].stamp(ObservationPoint.GATEWAY_EGRESS, t)
        return out

    def next_wakeup(self, t: Instant) -> Optional[Instant]:
        return self.port.next_wakeup(t)
