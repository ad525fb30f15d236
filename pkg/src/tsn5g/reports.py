"""Capture and report CSV files, plus the one-line run summary.

Timestamps are written as integer nanoseconds, so a capture read back
yields exactly the instants that were simulated.
"""

import csv
import io
from decimal import Decimal
from dataclasses import dataclass
from typing import Dict, List

from .analysis import FeasibilityVerdict, PeriodicityReport, empirical_label
from .core import NS_PER_MS, ObservationPoint, PATH_ORDER
from .sim import CaptureRecord, CaptureSet

CAPTURE_HEADER = ["point", "seq", "stream", "t_ns", "size_bytes"]
REPORT_HEADER = ["point", "expected_period_ns", "tol_ns", "n_cycles", "mean_interarrival_ns",
                 "min_interarrival_ns", "max_interarrival_ns", "jitter_ns", "cv",
                 "fraction_within_tol", "missing_cycles", "missing_count", "empirical"]


class CaptureFormatError(ValueError):
    pass


def capture_csv(captures: CaptureSet) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CAPTURE_HEADER)
    for point in PATH_ORDER:
        for r in captures.at(point):
            w.writerow([point.value, r.seq, r.stream or "", r.t, r.size_bytes])
    return buf.getvalue()


def parse_capture(text: str, source: str = "<capture>") -> CaptureSet:
    rows = csv.reader(io.StringIO(text))
    header = next(rows, None)
    if header != CAPTURE_HEADER:
        raise CaptureFormatError(f"{source}:1: expected header {','.join(CAPTURE_HEADER)}")
    captures = CaptureSet()
    for lineno, row in enumerate(rows, 2):
        if not row:
            continue
        try:
            point_name, seq, stream, t, size = row
            record = CaptureRecord(int(seq), stream or None, int(t), int(size))
            point = ObservationPoint(point_name)
        except ValueError as e:
            raise CaptureFormatError(f"{source}:{lineno}: {e}") from None
        captures.records[point].append(record)
    for point in PATH_ORDER:
        captures.records[point].sort(key=lambda r: (r.t, r.seq))
    return captures


def format_millis(ns: int) -> str:
    """Exact decimal milliseconds, e.g. -3.1ms."""
    return f"{(Decimal(ns) / NS_PER_MS).normalize():f}ms"


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def report_rows(reports: Dict[ObservationPoint, PeriodicityReport],
                missing_count: Dict[ObservationPoint, int],
                cv_threshold: float) -> List[List[str]]:
    rows = []
    for point, rep in reports.items():
        rows.append([point.value] + [_fmt(v) for v in (
            rep.expected_period, rep.tol, rep.n_cycles, rep.mean_interarrival,
            rep.min_interarrival, rep.max_interarrival, rep.jitter, rep.cv,
            rep.fraction_within_tol, rep.missing_cycles, missing_count.get(point, 0))]
            + [empirical_label(rep, cv_threshold)])
    return rows


def report_csv(reports, missing_count, cv_threshold) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_HEADER)
    w.writerows(report_rows(reports, missing_count, cv_threshold))
    return buf.getvalue()


@dataclass
class RunSummary:
    name: str
    feasibility: FeasibilityVerdict
    report: PeriodicityReport
    missing_count: int
    cv_threshold: float

    def line(self) -> str:
        rep = self.report
        jitter = "n/a" if rep.jitter is None else f"{rep.jitter}ns"
        cv = "n/a" if rep.cv is None else f"{rep.cv:.4f}"
        frac = "n/a" if rep.fraction_within_tol is None else f"{rep.fraction_within_tol:.3f}"
        return (f"{self.name}: class={self.feasibility.verdict.value}, jitter={jitter}, "
                f"cv={cv}, fraction_within_tol={frac}, missing_count={self.missing_count}, "
                f"missing_cycles={rep.missing_cycles}, "
                f"margin={format_millis(self.feasibility.margin)}, "
                f"empirical={empirical_label(rep, self.cv_threshold)}")
