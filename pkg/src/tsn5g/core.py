"""Shared domain types and the integer nanosecond time base.

Instants and durations are plain ``int`` nanoseconds. Nothing on the
event path ever touches floating point time.
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, Optional

Instant = int
Duration = int

NS_PER_US = 1_000
NS_PER_MS = 1_000_000
NS_PER_S = 1_000_000_000

# simulation horizons and every derived instant must stay below this
TIME_LIMIT = 2 ** 63

DEFAULT_MTU = 1500
MIN_FRAME_BYTES = 64
# preamble + SFD (8) and inter-frame gap (12)
FRAME_OVERHEAD_BYTES = 20
BEST_EFFORT_QUEUE = 0
NUM_QUEUES = 8


class ConfigError(ValueError):
    """A configuration problem. ``kind`` is a stable machine-readable tag."""

    def __init__(self, kind, detail=""):
        self.kind = kind
        self.detail = detail
        super().__init__(f"{kind}: {detail}" if detail else kind)

    def __eq__(self, other):
        if not isinstance(other, ConfigError):
            return NotImplemented
        return (self.kind, self.detail) == (other.kind, other.detail)

    def __hash__(self):
        return hash((self.kind, self.detail))


def _checked(ticks: int) -> Duration:
    if ticks < 0:
        raise ConfigError("NegativeDuration", str(ticks))
    if ticks >= TIME_LIMIT:
        raise ConfigError("DurationOverflow", str(ticks))
    return ticks


def duration_from_nanos(ns: int) -> Duration:
    return _checked(int(ns))


def duration_from_micros(us: int) -> Duration:
    return _checked(int(us) * NS_PER_US)


def duration_from_millis(ms: int) -> Duration:
    """Whole milliseconds to nanoseconds. Use the micro constructor for 12.5 ms."""
    return _checked(int(ms) * NS_PER_MS)


def duration_from_secs(s: int) -> Duration:
    return _checked(int(s) * NS_PER_S)


def serialization_time(size_bytes: int, link_rate_bps: int, include_overhead: bool = True) -> Duration:
    """Wire time of one frame, rounded up to the next nanosecond."""
    if link_rate_bps <= 0:
        raise ConfigError("ZeroLinkRate", str(link_rate_bps))
    if size_bytes < 0:
        raise ConfigError("NegativeFrameSize", str(size_bytes))
    bits = (size_bytes + (FRAME_OVERHEAD_BYTES if include_overhead else 0)) * 8
    return -(-bits * NS_PER_S // link_rate_bps)


def format_duration(ns: int) -> str:
    """Shortest exact rendering with a unit suffix, e.g. 12500us, 200ms."""
    if ns == 0:
        return "0ns"
    for unit, scale in (("s", NS_PER_S), ("ms", NS_PER_MS), ("us", NS_PER_US)):
        if ns % scale == 0:
            return f"{ns // scale}{unit}"
    return f"{ns}ns"


class ObservationPoint(Enum):
    GATEWAY_INGRESS = "gateway_ingress"
    GATEWAY_EGRESS = "gateway_egress"
    CORE_ARRIVAL = "core_arrival"


# path order; taps must be monotone along it
PATH_ORDER = (ObservationPoint.GATEWAY_INGRESS, ObservationPoint.GATEWAY_EGRESS,
              ObservationPoint.CORE_ARRIVAL)


@dataclass
class Frame:
    seq: int
    size_bytes: int
    created_at: Instant
    dst: str = ""
    stream: Optional[str] = None
    pcp: Optional[int] = None
    vlan: Optional[int] = None
    queue: Optional[int] = None
    taps: Dict[ObservationPoint, Instant] = field(default_factory=dict)

    def stamp(self, point: ObservationPoint, t: Instant):
        self.taps[point] = t

    def tagged(self, **changes) -> "Frame":
        return replace(self, taps=dict(self.taps), **changes)

    @property
    def is_best_effort(self) -> bool:
        return self.stream is None
