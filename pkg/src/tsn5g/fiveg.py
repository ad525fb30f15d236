"""Black-box 5G bridge.

The bridge adds a per-frame uplink delay drawn from a bounded law and can
limit how many frames are in transit at once. Delays are sampled as
floats and rounded once to integer nanoseconds; everything downstream is
integer time.
"""

import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Optional, Tuple, Union

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr, ndtri

from .core import ConfigError, Duration, Frame, Instant, ObservationPoint

# Measured round-trip latency of the reference 5G system (min, mean, max), in ns.
RTT_MIN = 6_300_000
RTT_MEAN = 11_360_000
RTT_MAX = 33_100_000


@dataclass(frozen=True)
class Constant:
    delay: Duration

    def bounds(self) -> Tuple[Duration, Duration]:
        return self.delay, self.delay

    def sample(self, rng: np.random.Generator, at: Instant = 0) -> Duration:
        return self.delay


@dataclass(frozen=True)
class UniformBounded:
    low: Duration
    high: Duration

    def bounds(self):
        return self.low, self.high

    def sample(self, rng, at=0):
        return int(rng.integers(self.low, self.high, endpoint=True))

    def sample_many(self, rng, n):
        return rng.integers(self.low, self.high, size=n, endpoint=True)


@dataclass(frozen=True)
class TruncatedLognormal:
    """``low + Y`` with ``Y`` lognormal, truncated at ``high - low``.

    The two lognormal parameters are pinned by two conditions: the
    truncation point sits at the ``tail_quantile`` of the untruncated law,
    and the truncated mean equals ``mean``.
    """

    low: Duration
    high: Duration
    mean: Duration
    tail_quantile: float = 0.999

    def bounds(self):
        return self.low, self.high

    @cached_property
    def params(self) -> Tuple[float, float]:
        """Fitted ``(mu, sigma)`` of the excess over ``low``, in ns."""
        return fit_truncated_lognormal(self.mean - self.low, self.high - self.low,
                                       self.tail_quantile)

    @cached_property
    def _cdf_at_cut(self) -> float:
        mu, sigma = self.params
        return float(ndtr((math.log(self.high - self.low) - mu) / sigma))

    def sample(self, rng, at=0):
        mu, sigma = self.params
        u = rng.random() * self._cdf_at_cut
        excess = math.exp(mu + sigma * float(ndtri(u))) if u > 0 else 0.0
        return min(self.high, self.low + round(excess))

    def sample_many(self, rng, n):
        mu, sigma = self.params
        u = rng.random(n) * self._cdf_at_cut
        with np.errstate(divide="ignore"):
            excess = np.exp(mu + sigma * ndtri(u))
        return np.minimum(self.high, self.low + np.rint(excess).astype(np.int64))


def truncated_lognormal_mean(mu: float, sigma: float, cut: float) -> float:
    """Mean of a lognormal(mu, sigma) conditioned on being at most ``cut``."""
    z = (math.log(cut) - mu) / sigma
    return math.exp(mu + sigma * sigma / 2) * ndtr(z - sigma) / ndtr(z)


def fit_truncated_lognormal(mean_excess: float, cut: float, tail_quantile: float = 0.999):
    """Solve for ``(mu, sigma)`` with ``cut`` at ``tail_quantile`` and the given mean.

    With the quantile pinned, ``mu = ln(cut) - z*sigma`` and the truncated
    mean falls monotonically from ``cut`` (sigma -> 0) to 0, so a bracketing
    root finder on sigma is enough.
    """
    if not 0 < mean_excess < cut:
        raise ConfigError("InfeasibleDelayLaw",
                          f"mean excess {mean_excess} must lie in (0, {cut})")
    if not 0.5 < tail_quantile < 1:
        raise ConfigError("InfeasibleDelayLaw", f"tail quantile {tail_quantile}")
    z = float(ndtri(tail_quantile))
    log_cut = math.log(cut)

    def gap(sigma):
        return truncated_lognormal_mean(log_cut - z * sigma, sigma, cut) - mean_excess

    hi = 1.0
    while gap(hi) > 0:
        hi *= 2
        if hi > 64:
            raise ConfigError("InfeasibleDelayLaw", "mean too small to fit")
    sigma = brentq(gap, 1e-9, hi, xtol=1e-14, rtol=1e-14, maxiter=500)
    return log_cut - z * sigma, sigma


@dataclass(frozen=True)
class TddConfig:
    slot_duration: Duration = 500_000
    pattern: str = "DDDDDSUUUU"

    def problems(self):
        errs = []
        if self.slot_duration <= 0:
            errs.append(ConfigError("InvalidTdd", f"slot duration {self.slot_duration}"))
        if not self.pattern or set(self.pattern) - {"D", "S", "U"}:
            errs.append(ConfigError("InvalidTdd", f"pattern {self.pattern!r}"))
        elif "U" not in self.pattern:
            errs.append(ConfigError("InvalidTdd", "pattern has no uplink slot"))
        return errs

    @property
    def cycle(self) -> Duration:
        return self.slot_duration * len(self.pattern)


def next_uplink_opportunity(tdd: TddConfig, t: Instant) -> Instant:
    """Earliest instant at or after ``t`` inside an uplink slot.

    Special slots count as non-uplink.
    """
    n = len(tdd.pattern)
    cycle_start = t - t % tdd.cycle
    idx = (t - cycle_start) // tdd.slot_duration
    if tdd.pattern[idx] == "U":
        return t
    for k in range(idx + 1, idx + 1 + n):
        if tdd.pattern[k % n] == "U":
            return cycle_start + k * tdd.slot_duration
    raise ConfigError("InvalidTdd", "pattern has no uplink slot")


@dataclass(frozen=True)
class SlotQuantized:
    inner: "DelayModel"
    tdd: TddConfig = TddConfig()

    def bounds(self):
        low, high = self.inner.bounds()
        longest_wait = self.tdd.cycle - self.tdd.slot_duration * self.tdd.pattern.count("U")
        return low, high + longest_wait

    def sample(self, rng, at=0):
        return next_uplink_opportunity(self.tdd, at) - at + self.inner.sample(rng, at)


DelayModel = Union[Constant, UniformBounded, TruncatedLognormal, SlotQuantized]


def sample_delay(model: DelayModel, rng: np.random.Generator, at: Instant = 0) -> Duration:
    return model.sample(rng, at)


def delay_problems(model: DelayModel):
    if isinstance(model, SlotQuantized):
        return model.tdd.problems() + delay_problems(model.inner)
    low, high = model.bounds()
    errs = []
    if low < 0 or high < low:
        errs.append(ConfigError("InvalidDelayBounds", f"[{low}, {high}]"))
    elif isinstance(model, TruncatedLognormal):
        try:
            model.params
        except ConfigError as e:
            errs.append(e)
    return errs


class Overflow(Enum):
    DROP = "drop"
    DEFER = "defer"


@dataclass(frozen=True)
class BridgeModel:
    delay: DelayModel
    in_flight_capacity: Optional[int] = None
    overflow: Overflow = Overflow.DROP
    defer_extra: Duration = 0
    fifo_enforced: bool = False
    rng_seed: int = 0

    def problems(self):
        errs = delay_problems(self.delay)
        if self.in_flight_capacity is not None and self.in_flight_capacity < 1:
            errs.append(ConfigError("InvalidCapacity", f"bridge: {self.in_flight_capacity}"))
        if self.defer_extra < 0:
            errs.append(ConfigError("InvalidDefer", str(self.defer_extra)))
        return errs


class Bridge:
    """Runtime bridge state: RNG, in-flight count and FIFO watermark."""

    def __init__(self, model: BridgeModel, rng: Optional[np.random.Generator] = None):
        self.model = model
        self.rng = rng if rng is not None else np.random.default_rng(model.rng_seed)
        self.in_flight = 0
        self.dropped = 0
        self.deferred = 0
        self._last_arrival = None

    def transit(self, frame: Frame, t_send: Instant) -> Optional[Instant]:
        """Admit ``frame`` at ``t_send``; returns its core arrival, None if dropped.

        The caller reports the arrival back through :meth:`deliver`.
        """
        model = self.model
        extra = 0
        if model.in_flight_capacity is not None and self.in_flight >= model.in_flight_capacity:
            if model.overflow is Overflow.DROP:
                self.dropped += 1
                return None
            extra = model.defer_extra
            self.deferred += 1
        arrival = t_send + sample_delay(model.delay, self.rng, t_send) + extra
        if model.fifo_enforced and self._last_arrival is not None:
            arrival = max(arrival, self._last_arrival)
        self._last_arrival = arrival
        self.in_flight += 1
        return arrival

    def deliver(self, frame: Frame, at: Instant):
        frame.stamp(ObservationPoint.CORE_ARRIVAL, at)
        self.in_flight -= 1
