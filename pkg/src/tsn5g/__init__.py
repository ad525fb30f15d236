"""Discrete-event model of 802.1Qbv traffic crossing a TSN gateway and a 5G bridge."""

from .analysis import (FeasibilityVerdict, PeriodicityReport, Verdict, cycle_anchors,
                       detect_missing, feasibility, periodicity)
from .config import load_scenario, parse_scenario
from .core import ConfigError, Frame, ObservationPoint, serialization_time
from .fiveg import (Bridge, BridgeModel, Constant, SlotQuantized, TddConfig, TruncatedLognormal,
                    UniformBounded, next_uplink_opportunity, sample_delay)
from .gateway import Gateway, GatewayConfig, StreamRule, classify, validate
from .sim import ConstantBitrate, Periodic, ScenarioConfig, generate, run
from .tas import (GateSchedule, GateWindow, TasPort, UnschedulableFrame, fits_before_close,
                  gate_state, next_transmit_instant)

__version__ = "0.1.0"
