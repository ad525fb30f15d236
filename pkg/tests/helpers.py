"""Builders and brute-force oracles shared by the test modules.

The oracles here deliberately avoid the package's own scheduling helpers:
gate state is recomputed from the raw window list, and transmit instants
are found by scanning candidate instants.
"""

import numpy as np

from tsn5g.core import NS_PER_MS, serialization_time
from tsn5g.fiveg import BridgeModel, Constant
from tsn5g.gateway import GatewayConfig, StreamRule
from tsn5g.sim import AnalysisSettings, Periodic, ScenarioConfig, TrafficSource
from tsn5g.tas import GateSchedule, GateWindow

DST = "10.10.0.10"


def reference_schedule():
    return GateSchedule(200 * NS_PER_MS, [GateWindow(0, 25 * NS_PER_MS, {1})])


def s1_rule():
    return StreamRule(DST, "S1", vlan_id=100, pcp=5, queue=1)


def make_scenario(schedule=None, sources=None, delay=None, horizon=4_000 * NS_PER_MS,
                  rules=None, seed=0, queue_capacity=None, **bridge_kw):
    schedule = schedule or reference_schedule()
    if sources is None:
        sources = [TrafficSource(Periodic(200 * NS_PER_MS, 1000, 20), DST)]
    gateway = GatewayConfig(rules if rules is not None else [s1_rule()], schedule,
                            queue_capacity=queue_capacity or {})
    bridge = BridgeModel(delay or Constant(5_680_000), **bridge_kw)
    return ScenarioConfig("test", seed, horizon, sources, gateway, bridge, AnalysisSettings())


# -- gate oracle -------------------------------------------------------------

def raw_open(windows, base, epoch, queue, t):
    phase = (t - epoch) % base
    return any(queue in qs and off <= phase < off + dur for off, dur, qs in windows)


def raw_boundaries(windows, base, epoch, lo, hi):
    """All window edges (absolute) in the open interval (lo, hi)."""
    out = []
    c = (lo - epoch) // base
    while epoch + c * base < hi:
        for off, dur, _ in windows:
            for edge in (off, off + dur):
                b = epoch + c * base + edge
                if lo < b < hi:
                    out.append(b)
        c += 1
    return out


def raw_fits(windows, base, epoch, queue, t, tx):
    """Gate open throughout [t, t + tx)."""
    if not raw_open(windows, base, epoch, queue, t):
        return False
    return all(raw_open(windows, base, epoch, queue, b)
               for b in raw_boundaries(windows, base, epoch, t, t + tx))


def raw_next_start(windows, base, epoch, queue, t, tx, cycles=3):
    """Scan ``t`` and every later window start for the first feasible start."""
    candidates = [t]
    c = (t - epoch) // base
    for k in range(c, c + cycles + 1):
        for off, _, qs in windows:
            s = epoch + k * base + off
            if s > t and queue in qs:
                candidates.append(s)
    for cand in sorted(candidates):
        if raw_fits(windows, base, epoch, queue, cand, tx):
            return cand
    return None


def raw_windows(schedule):
    return [(w.offset, w.duration, w.open_queues) for w in schedule.windows]


def oracle_taps(schedule, period, phase, count, size, delay, link_rate=100_000_000,
                overhead=True, queue=1, horizon=None):
    """Closed-form tap chain for one periodic stream on one queue.

    ingress_k = phase + k*period
    egress_k  = first feasible start >= max(ingress_k, egress_{k-1} + tx)
    core_k    = egress_k + delay
    """
    windows = raw_windows(schedule)
    tx = serialization_time(size, link_rate, overhead)
    taps = []
    free_at = None
    for k in range(count):
        ingress = phase + k * period
        if horizon is not None and ingress >= horizon:
            break
        ready = ingress if free_at is None else max(ingress, free_at)
        egress = raw_next_start(windows, schedule.base_period, schedule.epoch, queue, ready, tx)
        taps.append((ingress, egress, egress + delay))
        free_at = egress + tx
    return taps


def random_schedule(rng: np.random.Generator, queues=(1,), n_windows=None, min_len=0,
                    base_range=(1_000_000, 20_000_000), exclusive=False):
    """Non-overlapping windows inside a random base period."""
    base = int(rng.integers(*base_range))
    n = n_windows or int(rng.integers(1, 5))
    cuts = sorted(set(int(x) for x in rng.integers(0, base, size=2 * n)))
    windows = []
    for a, b in zip(cuts[0::2], cuts[1::2]):
        if b - a < max(min_len, 1):
            continue
        if exclusive:
            qs = {int(rng.choice(queues))}
        else:
            qs = set(int(q) for q in rng.choice(queues, size=int(rng.integers(1, len(queues) + 1))))
        windows.append(GateWindow(a, b - a, qs))
    epoch = int(rng.integers(0, base)) if rng.random() < 0.3 else 0
    return GateSchedule(base, windows, epoch)


# -- acceptance reporting ----------------------------------------------------

ACCEPTANCE_LINES = []


def verdict(number, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok
