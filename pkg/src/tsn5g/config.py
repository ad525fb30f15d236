"""Scenario files.

A scenario is a flat list of ``key = value`` lines; ``#`` starts a comment.
Durations always carry a unit (``ns``, ``us``, ``ms``, ``s``) and may be
decimal as long as they land on a whole nanosecond (``12.5ms``). Keys
``gateway.window`` and ``gateway.rule`` may repeat; every other key may
appear once. See ``scenarios/`` for complete examples.
"""

import re
from decimal import Decimal, InvalidOperation
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .core import (BEST_EFFORT_QUEUE, ConfigError, DEFAULT_MTU, NS_PER_MS, NS_PER_S, NS_PER_US,
                   ObservationPoint, TIME_LIMIT)
from .fiveg import (BridgeModel, Constant, Overflow, RTT_MAX, SlotQuantized, TddConfig,
                    TruncatedLognormal, UniformBounded)
from .gateway import GatewayConfig, StreamRule
from .sim import AnalysisSettings, ConstantBitrate, Periodic, ScenarioConfig, TrafficSource
from .tas import GateSchedule, GateWindow

REPEATABLE = {"gateway.window", "gateway.rule"}

_UNITS = {"ns": 1, "us": NS_PER_US, "ms": NS_PER_MS, "s": NS_PER_S}
_DURATION = re.compile(r"^(\d+(?:\.\d+)?)(ns|us|ms|s)$")


class ParseError(ValueError):
    def __init__(self, source, line, key, message):
        self.source, self.line, self.key = source, line, key
        where = f"{source}:{line}" if line else source
        super().__init__(f"{where}: {key}: {message}" if key else f"{where}: {message}")


def parse_duration(text: str) -> int:
    m = _DURATION.match(text.strip())
    if not m:
        raise ValueError(f"expected a duration with unit ns/us/ms/s, got {text!r}")
    try:
        ns = Decimal(m.group(1)) * _UNITS[m.group(2)]
    except InvalidOperation:
        raise ValueError(f"bad number {m.group(1)!r}") from None
    if ns != ns.to_integral_value():
        raise ValueError(f"{text!r} is not a whole number of nanoseconds")
    if ns >= TIME_LIMIT:
        raise ValueError(f"{text!r} overflows the 64-bit time base")
    return int(ns)


def parse_int(text: str) -> int:
    text = text.strip().replace("_", "")
    if not re.fullmatch(r"\d+", text):
        raise ValueError(f"expected a non-negative integer, got {text!r}")
    return int(text)


def parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("on", "true", "yes", "1"):
        return True
    if t in ("off", "false", "no", "0"):
        return False
    raise ValueError(f"expected on/off, got {text!r}")


def parse_optional_count(text: str) -> Optional[int]:
    return None if text.strip().lower() == "unbounded" else parse_int(text)


def _kv(tokens: Sequence[str]) -> Tuple[List[str], Dict[str, str]]:
    positional, named = [], {}
    for tok in tokens:
        if "=" in tok:
            k, v = tok.split("=", 1)
            named[k] = v
        else:
            positional.append(tok)
    return positional, named


def parse_window(text: str) -> GateWindow:
    parts = text.split()
    if len(parts) != 3:
        raise ValueError("expected '<offset> <duration> <queue>[,<queue>...]'")
    queues = [parse_int(q) for q in parts[2].split(",")]
    return GateWindow(parse_duration(parts[0]), parse_duration(parts[1]), queues)


def parse_rule(text: str) -> StreamRule:
    positional, named = _kv(text.split())
    if len(positional) != 1 or set(named) != {"stream", "vlan", "pcp", "queue"}:
        raise ValueError("expected '<dst> stream=<id> vlan=<n> pcp=<n> queue=<n>'")
    return StreamRule(positional[0], named["stream"], parse_int(named["vlan"]),
                      parse_int(named["pcp"]), parse_int(named["queue"]))


def parse_delay(text: str):
    parts = text.split()
    if not parts:
        raise ValueError("empty delay law")
    kind, (positional, named) = parts[0].lower(), _kv(parts[1:])
    if kind == "constant" and len(positional) == 1 and not named:
        return Constant(parse_duration(positional[0]))
    if kind == "uniform" and len(positional) == 2 and not named:
        return UniformBounded(parse_duration(positional[0]), parse_duration(positional[1]))
    if kind == "lognormal" and len(positional) == 2 and "mean" in named \
            and set(named) <= {"mean", "tail"}:
        tail = float(named.get("tail", "0.999"))
        return TruncatedLognormal(parse_duration(positional[0]), parse_duration(positional[1]),
                                  parse_duration(named["mean"]), tail)
    raise ValueError("expected 'constant <d>', 'uniform <min> <max>' or "
                     "'lognormal <min> <max> mean=<d> [tail=<q>]'")


def parse_overflow(text: str) -> Tuple[Overflow, int]:
    parts = text.split()
    if parts == ["drop"]:
        return Overflow.DROP, 0
    if len(parts) == 2 and parts[0] == "defer":
        return Overflow.DEFER, parse_duration(parts[1])
    raise ValueError("expected 'drop' or 'defer <duration>'")


class _Entries:
    """Parsed lines with provenance, consumed key by key."""

    def __init__(self, source: str):
        self.source = source
        self.values: Dict[str, List[Tuple[int, str]]] = {}

    def add(self, lineno, key, value, replace=False):
        if replace or key not in self.values:
            self.values[key] = []
        elif key not in REPEATABLE:
            first = self.values[key][0][0]
            raise ParseError(self.source, lineno, key, f"duplicate key (first on line {first})")
        self.values[key].append((lineno, value))

    def error(self, key, message):
        lines = self.values.get(key)
        raise ParseError(self.source, lines[0][0] if lines else 0, key, message)

    def get(self, key, conv, default=...):
        if key not in self.values:
            if default is ...:
                raise ParseError(self.source, 0, key, "missing required key")
            return default
        lineno, raw = self.values.pop(key)[0]
        try:
            return conv(raw)
        except (ValueError, ConfigError) as e:
            raise ParseError(self.source, lineno, key, str(e)) from None

    def get_all(self, key, conv):
        out = []
        for lineno, raw in self.values.pop(key, []):
            try:
                out.append(conv(raw))
            except (ValueError, ConfigError) as e:
                raise ParseError(self.source, lineno, key, str(e)) from None
        return out

    def prefixes(self, head):
        """Distinct source labels under ``traffic`` (``""`` for the bare form)."""
        labels = []
        for key in self.values:
            parts = key.split(".")
            if parts[0] != head:
                continue
            label = parts[1] if len(parts) == 3 else ""
            if label not in labels:
                labels.append(label)
        return labels


def _traffic(entries: _Entries, label: str) -> TrafficSource:
    p = f"traffic.{label}." if label else "traffic."
    kind = entries.get(p + "kind", str.strip)
    dst = entries.get(p + "dst", str.strip)
    size = entries.get(p + "frame_size", parse_int)
    if kind == "periodic":
        spec = Periodic(entries.get(p + "period", parse_duration), size,
                        entries.get(p + "count", parse_int),
                        entries.get(p + "phase", parse_duration, 0))
    elif kind == "cbr":
        spec = ConstantBitrate(entries.get(p + "bitrate_bps", parse_int), size,
                               entries.get(p + "duration", parse_duration),
                               entries.get(p + "jitter", parse_duration, 0),
                               entries.get(p + "start", parse_duration, 0))
    else:
        raise ParseError(entries.source, 0, p + "kind", f"expected periodic or cbr, got {kind!r}")
    return TrafficSource(spec, dst)


def parse_scenario(text: str, source: str = "<scenario>",
                   overrides: Sequence[str] = ()) -> ScenarioConfig:
    entries = _Entries(source)
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(source, lineno, None, f"expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not re.fullmatch(r"[a-z_][a-z0-9_]*(\.[a-z0-9_]+)*", key):
            raise ParseError(source, lineno, key, "malformed key")
        entries.add(lineno, key, value)
    overridden = set()
    for item in overrides:
        if "=" not in item:
            raise ParseError("--set", 0, None, f"expected key=value, got {item!r}")
        key, value = (s.strip() for s in item.split("=", 1))
        entries.add(0, key, value, replace=key not in overridden)
        overridden.add(key)

    labels = entries.prefixes("traffic")
    if not labels:
        raise ParseError(source, 0, "traffic.kind", "missing required key")
    sources = [_traffic(entries, label) for label in labels]

    schedule = GateSchedule(entries.get("gateway.base_period", parse_duration),
                            entries.get_all("gateway.window", parse_window),
                            entries.get("gateway.epoch", parse_duration, 0))
    if not schedule.windows:
        raise ParseError(source, 0, "gateway.window", "at least one window is required")
    capacity = {}
    for key in [k for k in entries.values if k.startswith("gateway.queue_capacity.")]:
        q = key.rsplit(".", 1)[1]
        if not q.isdigit():
            entries.error(key, "queue index must be an integer")
        cap = entries.get(key, parse_optional_count)
        if cap is not None:
            capacity[int(q)] = cap
    gateway = GatewayConfig(
        rules=entries.get_all("gateway.rule", parse_rule),
        schedule=schedule,
        link_rate_bps=entries.get("gateway.link_rate_bps", parse_int, 100_000_000),
        mtu=entries.get("gateway.mtu", parse_int, DEFAULT_MTU),
        best_effort_queue=entries.get("gateway.best_effort_queue", parse_int, BEST_EFFORT_QUEUE),
        include_overhead=entries.get("gateway.frame_overhead", parse_bool, True),
        queue_capacity=capacity,
    )

    delay = entries.get("bridge.delay", parse_delay)
    if entries.get("bridge.tdd", parse_bool, False):
        delay = SlotQuantized(delay, TddConfig(
            entries.get("bridge.tdd.slot", parse_duration, 500_000),
            entries.get("bridge.tdd.pattern", str.strip, "DDDDDSUUUU")))
    overflow, extra = entries.get("bridge.overflow", parse_overflow, (Overflow.DROP, 0))
    seed = entries.get("seed", parse_int, 0)
    bridge = BridgeModel(delay,
                         in_flight_capacity=entries.get("bridge.capacity", parse_optional_count,
                                                        None),
                         overflow=overflow, defer_extra=extra,
                         fifo_enforced=entries.get("bridge.fifo", parse_bool, False),
                         rng_seed=seed)

    point = entries.get("analysis.point", ObservationPoint, ObservationPoint.CORE_ARRIVAL)
    analysis = AnalysisSettings(
        expected_period=entries.get("analysis.expected_period", parse_duration, None),
        tol=entries.get("analysis.tol", parse_duration, None),
        d_max=entries.get("analysis.d_max", parse_duration, RTT_MAX),
        cv_threshold=entries.get("analysis.cv_threshold", float, 0.05),
        point=point,
    )
    scenario = ScenarioConfig(
        name=entries.get("name", str.strip),
        seed=seed,
        horizon=entries.get("horizon", parse_duration),
        sources=sources,
        gateway=gateway,
        bridge=bridge,
        analysis=analysis,
    )
    if entries.values:
        key = next(iter(entries.values))
        entries.error(key, "unknown key")
    if not re.fullmatch(r"[A-Za-z0-9_.-]+", scenario.name):
        raise ParseError(source, 0, "name", "use letters, digits, '.', '_' or '-'")
    return scenario


def bundled_scenarios() -> List[str]:
    root = resources.files("tsn5g") / "scenarios"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".cfg"))


def read_scenario_text(path) -> Tuple[str, str]:
    """Text and display name of a scenario file; bare names fall back to bundled ones."""
    p = Path(path)
    if p.exists():
        return p.read_text(), str(p)
    name = p.name if p.suffix else p.name + ".cfg"
    bundled = resources.files("tsn5g") / "scenarios" / name
    if str(path) == p.name and bundled.is_file():
        return bundled.read_text(), name
    raise FileNotFoundError(path)


def load_scenario(path, overrides: Sequence[str] = ()) -> ScenarioConfig:
    text, display = read_scenario_text(path)
    return parse_scenario(text, display, overrides)
