import numpy as np
import pytest

from tsn5g.core import NS_PER_MS, ObservationPoint as P
from tsn5g.fiveg import Constant, Overflow, UniformBounded
from tsn5g.gateway import StreamRule
from tsn5g.reports import capture_csv
from tsn5g.sim import (Action, ConstantBitrate, InvalidScenario, Periodic, Simulation, TrafficSource,
                       generate, run)
from tsn5g.tas import GateSchedule, GateWindow

from helpers import DST, make_scenario, oracle_taps

RNG = np.random.default_rng(0)


def test_generate_periodic():
    assert [t for t, _ in generate(Periodic(200 * NS_PER_MS, 1000, 3), RNG)] == \
        [0, 200 * NS_PER_MS, 400 * NS_PER_MS]


def test_generate_periodic_phase():
    assert [t for t, _ in generate(Periodic(100 * NS_PER_MS, 1000, 2, 5 * NS_PER_MS), RNG)] == \
        [5 * NS_PER_MS, 105 * NS_PER_MS]


def test_generate_cbr_exact_spacing():
    got = generate(ConstantBitrate(8_000_000, 1000, 10 * NS_PER_MS), RNG)
    assert [t for t, _ in got] == [k * NS_PER_MS for k in range(10)]
    assert {s for _, s in got} == {1000}


def test_generate_cbr_jitter_bounded():
    spec = ConstantBitrate(8_000_000, 1000, 100 * NS_PER_MS, jitter=300_000, start=NS_PER_MS)
    times = [t for t, _ in generate(spec, np.random.default_rng(5))]
    assert len(times) == 100 and times == sorted(times)
    nominal = [NS_PER_MS + k * NS_PER_MS for k in range(100)]
    assert all(abs(a - b) <= 300_000 for a, b in zip(sorted(times), nominal))


def test_reference_run_is_exactly_periodic():
    result = run(make_scenario())
    c = result.counters
    assert (c.generated, c.egressed, c.delivered) == (20, 20, 20)
    core = [r.t for r in result.captures.at(P.CORE_ARRIVAL)]
    assert {b - a for a, b in zip(core, core[1:])} == {200 * NS_PER_MS}
    assert core[0] == 5_680_000


def test_zero_count_run_is_empty():
    src = [TrafficSource(Periodic(200 * NS_PER_MS, 1000, 0), DST)]
    result = run(make_scenario(sources=src))
    assert len(result.captures) == 0
    assert all(v == 0 for v in vars(result.counters).values())


def test_same_seed_identical_capture():
    sc = make_scenario(delay=UniformBounded(3_150_000, 16_550_000), seed=11,
                       sources=[TrafficSource(ConstantBitrate(1_000_000, 1250, 3_900 * NS_PER_MS,
                                                              jitter=3 * NS_PER_MS), DST)])
    a, b = capture_csv(run(sc).captures), capture_csv(run(sc).captures)
    assert a == b
    sc.seed = 12
    assert capture_csv(run(sc).captures) != a


def test_invalid_scenario_rejected_before_running():
    sched = GateSchedule(200 * NS_PER_MS, [GateWindow(190 * NS_PER_MS, 25 * NS_PER_MS, {1})])
    with pytest.raises(InvalidScenario) as e:
        Simulation(make_scenario(schedule=sched))
    assert [x.kind for x in e.value.errors] == ["WindowExceedsBasePeriod"]


def test_matches_closed_form_oracle():
    sched = GateSchedule(7_000_000, [GateWindow(1_000_000, 400_000, {1}),
                                     GateWindow(5_000_000, 300_000, {1})])
    src = [TrafficSource(Periodic(900_000, 1500, 150, phase=123), DST)]
    result = run(make_scenario(schedule=sched, sources=src, delay=Constant(777),
                               horizon=10 ** 10))
    want = oracle_taps(sched, 900_000, 123, 150, 1500, 777)
    got = {p: {r.seq: r.t for r in result.captures.at(p)} for p in P}
    for k, (i, e, c) in enumerate(want):
        assert (got[P.GATEWAY_INGRESS][k], got[P.GATEWAY_EGRESS][k], got[P.CORE_ARRIVAL][k]) \
            == (i, e, c)


def test_horizon_is_exclusive_and_leftovers_counted():
    src = [TrafficSource(Periodic(50 * NS_PER_MS, 1000, 100), DST)]
    result = run(make_scenario(sources=src, horizon=1_000 * NS_PER_MS))
    c = result.counters
    assert c.generated == 20
    assert c.generated == c.delivered + c.in_flight_at_horizon + c.queued_at_horizon
    assert all(r.t < 1_000 * NS_PER_MS for p in P for r in result.captures.at(p))


def test_best_effort_traffic_never_leaves_without_window():
    src = [TrafficSource(Periodic(10 * NS_PER_MS, 100, 5), "192.168.1.7")]
    result = run(make_scenario(sources=src))
    assert result.counters.egressed == 0
    assert result.counters.queued_at_horizon == 5


def test_taps_monotone_along_path_and_sorted():
    sc = make_scenario(delay=UniformBounded(1, 30 * NS_PER_MS),
                       sources=[TrafficSource(ConstantBitrate(2_000_000, 500, 3 * 10 ** 9,
                                                              jitter=NS_PER_MS), DST)])
    caps = run(sc).captures
    t = {p: {r.seq: r.t for r in caps.at(p)} for p in P}
    for seq, ti in t[P.GATEWAY_INGRESS].items():
        if seq in t[P.GATEWAY_EGRESS]:
            assert ti <= t[P.GATEWAY_EGRESS][seq]
            if seq in t[P.CORE_ARRIVAL]:
                assert t[P.GATEWAY_EGRESS][seq] <= t[P.CORE_ARRIVAL][seq]
    for p in P:
        times = [r.t for r in caps.at(p)]
        assert times == sorted(times)
    egress = caps.seqs(P.GATEWAY_EGRESS)
    assert set(egress) <= set(caps.seqs(P.GATEWAY_INGRESS))


def test_strict_priority_between_streams():
    sched = GateSchedule(10 * NS_PER_MS, [GateWindow(0, 5 * NS_PER_MS, {1, 2})])
    rules = [StreamRule("a", "A", 10, 3, 1), StreamRule("b", "B", 20, 6, 2)]
    src = [TrafficSource(Periodic(10 * NS_PER_MS, 1500, 3, phase=6 * NS_PER_MS), "a"),
           TrafficSource(Periodic(10 * NS_PER_MS, 1500, 3, phase=7 * NS_PER_MS), "b")]
    caps = run(make_scenario(schedule=sched, sources=src, rules=rules,
                             horizon=40 * NS_PER_MS)).captures
    first = caps.at(P.GATEWAY_EGRESS)[0]
    assert first.stream == "B" and first.t == 10 * NS_PER_MS


@pytest.mark.parametrize("overflow_kw", [{}, {"in_flight_capacity": 2},
                                         {"in_flight_capacity": 2, "overflow": Overflow.DEFER,
                                          "defer_extra": 4 * NS_PER_MS}])
def test_bounded_delay_per_frame(overflow_kw):
    low, high = 3_150_000, 16_550_000
    sc = make_scenario(delay=UniformBounded(low, high), seed=3, horizon=5 * 10 ** 9,
                       sources=[TrafficSource(ConstantBitrate(1_000_000, 1250, 49 * 10 ** 8,
                                                              jitter=3 * NS_PER_MS), DST)],
                       **overflow_kw)
    caps = run(sc).captures
    egress = {r.seq: r.t for r in caps.at(P.GATEWAY_EGRESS)}
    extra = overflow_kw.get("defer_extra", 0)
    delays = [r.t - egress[r.seq] for r in caps.at(P.CORE_ARRIVAL)]
    assert delays and all(low <= d <= high + extra for d in delays)


def test_kernel_refuses_events_in_the_past():
    sim = Simulation(make_scenario())
    sim.now = 100
    with pytest.raises(AssertionError):
        sim.schedule(99, Action.GATE_EDGE)
