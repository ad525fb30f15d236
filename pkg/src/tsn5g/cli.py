"""Command line: ``run``, ``analyze`` and ``sweep``.

Exit codes: 0 success, 2 parse error (bad file, bad option), 3 the
scenario parsed but failed validation.
"""

import argparse
import csv
import dataclasses
import io
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from .analysis import analyze_points, detect_missing, feasibility, empirical_label
from .config import ParseError, parse_duration, parse_scenario, read_scenario_text
from .core import ObservationPoint, PATH_ORDER
from .reports import (CaptureFormatError, RunSummary, capture_csv, parse_capture, report_csv)
from .sim import ScenarioConfig, SimResult, Simulation
from .tas import GateSchedule, GateWindow

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_INVALID = 3

SWEEP_HEADER = ["base_period_ns", "window_ns", "status", "margin_ns", "class", "cv",
                "fraction_within_tol", "missing_count", "empirical", "errors"]


@dataclass
class RunOutcome:
    scenario: ScenarioConfig
    result: SimResult
    reports: Dict[ObservationPoint, object]
    missing: Dict[ObservationPoint, List[int]]
    summary: RunSummary

    @property
    def capture_csv(self) -> str:
        return capture_csv(self.result.captures)

    @property
    def report_csv(self) -> str:
        counts = {p: len(m) for p, m in self.missing.items()}
        return report_csv(self.reports, counts, self.scenario.analysis.cv_threshold)


def missing_frames(result: SimResult) -> Dict[ObservationPoint, List[int]]:
    """Frames lost between taps; frames merely cut off by the horizon do not count."""
    caps = result.captures
    queued, in_flight = set(result.queued), set(result.in_flight)
    ingress = caps.seqs(ObservationPoint.GATEWAY_INGRESS)
    egress = caps.seqs(ObservationPoint.GATEWAY_EGRESS)
    core = caps.seqs(ObservationPoint.CORE_ARRIVAL)
    return {
        ObservationPoint.GATEWAY_INGRESS: [],
        ObservationPoint.GATEWAY_EGRESS: [s for s in detect_missing(ingress, egress)
                                          if s not in queued],
        ObservationPoint.CORE_ARRIVAL: [s for s in detect_missing(egress, core)
                                        if s not in in_flight],
    }


def run_scenario(scenario: ScenarioConfig) -> RunOutcome:
    result = Simulation(scenario).run()
    reports = analyze_points(result.captures, scenario.expected_period, scenario.tolerance)
    missing = missing_frames(result)
    point = scenario.analysis.point
    summary = RunSummary(scenario.name,
                         feasibility(scenario.gateway.schedule, scenario.analysis.d_max,
                                     queues={r.queue for r in scenario.gateway.rules} or None),
                         reports[point], len(missing[ObservationPoint.CORE_ARRIVAL]),
                         scenario.analysis.cv_threshold)
    return RunOutcome(scenario, result, reports, missing, summary)


def _write(path: Path, text: str):
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _overrides(args) -> List[str]:
    extra = list(args.set or [])
    if args.seed is not None:
        extra.append(f"seed={args.seed}")
    return extra


def _load(args, err) -> Optional[tuple]:
    try:
        text, display = read_scenario_text(args.config)
    except OSError as e:
        print(f"error: cannot read {args.config}: {e}", file=err)
        return None
    return text, display


def cmd_run(args, out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    loaded = _load(args, err)
    if loaded is None:
        return EXIT_PARSE
    try:
        scenario = parse_scenario(*loaded, overrides=_overrides(args))
    except ParseError as e:
        print(f"parse error: {e}", file=err)
        return EXIT_PARSE
    errs = scenario.problems()
    if errs:
        print(f"{loaded[1]}: invalid scenario", file=err)
        for e in errs:
            print(f"  {e}", file=err)
        return EXIT_INVALID
    outcome = run_scenario(scenario)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write(out_dir / f"{scenario.name}.capture.csv", outcome.capture_csv)
    _write(out_dir / f"{scenario.name}.report.csv", outcome.report_csv)
    c = outcome.result.counters
    print(f"{scenario.name}: generated={c.generated} egressed={c.egressed} "
          f"delivered={c.delivered} dropped_gateway={c.dropped_gateway} "
          f"dropped_bridge={c.dropped_bridge} queued={c.queued_at_horizon} "
          f"in_flight={c.in_flight_at_horizon}", file=out)
    print(outcome.summary.line(), file=out)
    return EXIT_OK


def cmd_analyze(args, out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    try:
        text = Path(args.capture).read_text()
        captures = parse_capture(text, args.capture)
        period = parse_duration(args.period)
        tol = parse_duration(args.tol)
    except (OSError, CaptureFormatError, ValueError) as e:
        print(f"error: {e}", file=err)
        return EXIT_PARSE
    if period <= 0:
        print("error: --period must be positive", file=err)
        return EXIT_PARSE
    reports = analyze_points(captures, period, tol)
    seqs = {p: captures.seqs(p) for p in PATH_ORDER}
    missing = {
        ObservationPoint.GATEWAY_EGRESS: len(detect_missing(
            seqs[ObservationPoint.GATEWAY_INGRESS], seqs[ObservationPoint.GATEWAY_EGRESS])),
        ObservationPoint.CORE_ARRIVAL: len(detect_missing(
            seqs[ObservationPoint.GATEWAY_EGRESS], seqs[ObservationPoint.CORE_ARRIVAL])),
    }
    text = report_csv(reports, missing, args.cv_threshold)
    out.write(text)
    if args.out:
        _write(Path(args.out), text)
    return EXIT_OK


def derive_for_base(scenario: ScenarioConfig, base: int, fixed_window: bool) -> ScenarioConfig:
    """Same scenario with a new base period; windows scale with it unless fixed."""
    old = scenario.gateway.schedule
    if fixed_window:
        windows = old.windows
    else:
        windows = [GateWindow(w.offset * base // old.base_period,
                              w.duration * base // old.base_period, w.open_queues)
                   for w in old.windows]
    schedule = GateSchedule(base, windows, old.epoch)
    gateway = dataclasses.replace(scenario.gateway, schedule=schedule)
    analysis = dataclasses.replace(scenario.analysis, expected_period=base)
    return dataclasses.replace(scenario, gateway=gateway, analysis=analysis)


def _sweep_row(job) -> List[str]:
    text, display, overrides, base, fixed_window = job
    scenario = derive_for_base(parse_scenario(text, display, overrides), base, fixed_window)
    windows = scenario.gateway.schedule.windows
    window = str(max(w.duration for w in windows)) if windows else ""
    errs = scenario.problems()
    if errs:
        kinds = ";".join(sorted({e.kind for e in errs}))
        return [str(base), window, "invalid", "", "", "", "", "", "", kinds]
    outcome = run_scenario(scenario)
    s = outcome.summary
    rep = s.report
    return [str(base), window, "ok", str(s.feasibility.margin), s.feasibility.verdict.value,
            "" if rep.cv is None else f"{rep.cv:.6f}",
            "" if rep.fraction_within_tol is None else f"{rep.fraction_within_tol:.6f}",
            str(s.missing_count), empirical_label(rep, s.cv_threshold), ""]


def sweep_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    w.writerows(rows)
    return buf.getvalue()


def cmd_sweep(args, out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    loaded = _load(args, err)
    if loaded is None:
        return EXIT_PARSE
    overrides = _overrides(args)
    try:
        scenario = parse_scenario(*loaded, overrides=overrides)
        bases = [parse_duration(b) for b in args.bases.split(",") if b.strip()]
    except (ParseError, ValueError) as e:
        print(f"parse error: {e}", file=err)
        return EXIT_PARSE
    if not bases or any(b <= 0 for b in bases):
        print("parse error: --bases needs positive durations", file=err)
        return EXIT_PARSE
    errs = scenario.problems()
    if errs:
        print(f"{loaded[1]}: invalid scenario", file=err)
        for e in errs:
            print(f"  {e}", file=err)
        return EXIT_INVALID
    jobs = [(loaded[0], loaded[1], overrides, b, args.fixed_window) for b in bases]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            rows = list(pool.map(_sweep_row, jobs))
    else:
        rows = [_sweep_row(j) for j in jobs]
    text = sweep_csv(rows)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write(out_dir / f"{scenario.name}.sweep.csv", text)
    out.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tsn5g", description="Simulate 802.1Qbv traffic through a TSN gateway and a 5G bridge.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="scenario file, or the name of a bundled scenario")
        p.add_argument("--seed", type=int, help="override the scenario seed")
        p.add_argument("--out-dir", default=".", help="directory for output files")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override one scenario key (repeatable)")

    p = sub.add_parser("run", help="simulate one scenario, write capture and report CSVs")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("analyze", help="periodicity report for an existing capture CSV")
    p.add_argument("capture")
    p.add_argument("--period", required=True, help="expected period, e.g. 200ms")
    p.add_argument("--tol", required=True, help="tolerance on each interval, e.g. 13400us")
    p.add_argument("--cv-threshold", type=float, default=0.05)
    p.add_argument("--out", help="also write the report CSV here")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep", help="re-run a scenario over several base periods")
    common(p)
    p.add_argument("--bases", required=True, help="comma-separated durations, e.g. 200ms,100ms")
    p.add_argument("--fixed-window", action="store_true",
                   help="keep window durations instead of scaling them with the base period")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
