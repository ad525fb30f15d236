"""Determinism metrics over captures, and the global-schedule feasibility check."""

import statistics
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .core import Duration, Instant, ObservationPoint, PATH_ORDER
from .tas import GateSchedule

DEFAULT_CV_THRESHOLD = 0.05


def bucketize(times: Sequence[Instant], base_period: Duration) -> Tuple[List[Instant], List[int]]:
    """First timestamp per base-period bucket, and the indices of empty buckets.

    Bucket ``k`` is centred on ``t0 + k*base`` (``t0`` = first record), i.e.
    it spans ``[t0 + (k - 1/2)*base, t0 + (k + 1/2)*base)``. Centring keeps a
    cycle whose traffic arrives a little earlier than in the first cycle in
    its own bucket.
    """
    if not times:
        return [], []
    t0 = times[0]
    anchors = []
    missing = []
    last = -1
    for t in times:
        k = (2 * (t - t0) + base_period) // (2 * base_period)
        if k == last:
            continue
        missing.extend(range(last + 1, k))
        anchors.append(t)
        last = k
    return anchors, missing


def cycle_anchors(times: Sequence[Instant], base_period: Duration) -> List[Instant]:
    return bucketize(times, base_period)[0]


@dataclass(frozen=True)
class PeriodicityReport:
    expected_period: Duration
    tol: Duration
    n_cycles: int
    mean_interarrival: Optional[Duration] = None
    min_interarrival: Optional[Duration] = None
    max_interarrival: Optional[Duration] = None
    jitter: Optional[Duration] = None
    cv: Optional[float] = None
    fraction_within_tol: Optional[float] = None
    missing_cycles: int = 0

    @property
    def has_statistics(self) -> bool:
        return self.mean_interarrival is not None


def periodicity(anchors: Sequence[Instant], expected: Duration, tol: Duration,
                missing_cycles: Optional[int] = None) -> PeriodicityReport:
    """Interval statistics of successive anchors.

    Without an explicit ``missing_cycles`` the count is inferred from
    intervals spanning several expected periods.
    """
    n = len(anchors)
    if n < 2:
        return PeriodicityReport(expected, tol, n, missing_cycles=missing_cycles or 0)
    intervals = [b - a for a, b in zip(anchors, anchors[1:])]
    m = len(intervals)
    span = anchors[-1] - anchors[0]
    mean = (2 * span + m) // (2 * m)
    if missing_cycles is None:
        missing_cycles = sum(max(0, (2 * iv + expected) // (2 * expected) - 1)
                             for iv in intervals)
    lo, hi = min(intervals), max(intervals)
    cv = 0.0 if lo == hi else statistics.pstdev(intervals) / (span / m)
    within = sum(1 for iv in intervals if abs(iv - expected) <= tol)
    return PeriodicityReport(expected, tol, n, mean, lo, hi, hi - lo, cv, within / m,
                             missing_cycles)


def detect_missing(seqs_a: Iterable[int], seqs_b: Iterable[int]) -> List[int]:
    """Sequence numbers seen at tap A but never at tap B, in A's order."""
    seen = set(seqs_b)
    return [s for s in seqs_a if s not in seen]


class Verdict(Enum):
    DETERMINISTIC = "Deterministic"
    MARGINAL = "Marginal"
    INFEASIBLE = "Infeasible"


@dataclass(frozen=True)
class FeasibilityVerdict:
    margin: int
    verdict: Verdict


def classify_margin(margin: int, d_max: Duration) -> Verdict:
    if margin <= 0:
        return Verdict.INFEASIBLE
    if margin > d_max:
        return Verdict.DETERMINISTIC
    return Verdict.MARGINAL


def feasibility(schedule: GateSchedule, d_max: Duration, queues=None) -> FeasibilityVerdict:
    """Room left in a cycle once the window has drained through the 5G system.

    ``margin = base_period - window - d_max``. With several windows (or
    only those serving ``queues``), each is judged against the base period
    and the worst one is returned.
    """
    windows = [w for w in schedule.windows
               if queues is None or w.open_queues & frozenset(queues)]
    if not windows:
        raise ValueError("schedule has no window to judge")
    margin = min(schedule.base_period - w.duration - d_max for w in windows)
    return FeasibilityVerdict(margin, classify_margin(margin, d_max))


def empirical_label(report: PeriodicityReport, cv_threshold: float = DEFAULT_CV_THRESHOLD) -> str:
    """Label a measured capture by its cv; a heuristic cut-off, not a derived bound."""
    if not report.has_statistics:
        return "insufficient"
    return "deterministic" if report.cv < cv_threshold else "pseudo-deterministic"


def analyze_points(captures, expected: Duration, tol: Duration,
                   points=PATH_ORDER) -> Dict[ObservationPoint, PeriodicityReport]:
    """Periodicity report per observation point of a :class:`~tsn5g.sim.CaptureSet`."""
    out = {}
    for point in points:
        times = [r.t for r in captures.at(point)]
        anchors, missing = bucketize(times, expected)
        out[point] = periodicity(anchors, expected, tol, len(missing))
    return out
