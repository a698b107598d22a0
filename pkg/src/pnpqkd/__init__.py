"""Discrete-event simulator of a self-compensating fiber interferometer
for phase-coded quantum key distribution.

The package models the optics with Jones calculus on a port graph, traces
pulses through it event by event, and runs key-exchange sessions over the
traced intensities, including eavesdropping models and the countermeasures
the round-trip design affords.
"""

from .builders import build_double_mz, build_plug_and_play
from .components import (
    Attenuator,
    Coupler,
    FaradayMirror,
    FaradayRotator,
    FiberSegment,
    Mirror,
    PhaseModulator,
    PmWindow,
)
from .detection import DetectorSpec, MonitorSpec
from .errors import (
    AlarmTriggeredError,
    ConfigurationError,
    DegenerateConfigurationError,
    DomainError,
    EmptyKeyError,
    ProtocolMismatchError,
    ResourceLimitError,
)
from .network import (
    Edge,
    InterferometerSpec,
    PulseSegment,
    SourceSpec,
    TraceConfig,
    bin_and_interfere,
    trace,
)
from .protocol import (
    BB84,
    TWO_STATE,
    BeamSplit,
    BlockSlots,
    InterceptResend,
    SessionConfig,
    SessionPlan,
    SessionStats,
    SiftedKey,
    SlotRecords,
    StrongProbe,
    SuppressInconclusive,
    prepare_session,
    run_session,
    session_stats,
    sift,
)
from .visibility import FringeScan, decompose, visibility_scan

__version__ = "0.1.0"

__all__ = [
    "AlarmTriggeredError",
    "Attenuator",
    "BB84",
    "BeamSplit",
    "BlockSlots",
    "ConfigurationError",
    "Coupler",
    "DegenerateConfigurationError",
    "DetectorSpec",
    "DomainError",
    "Edge",
    "EmptyKeyError",
    "FaradayMirror",
    "FaradayRotator",
    "FiberSegment",
    "FringeScan",
    "InterceptResend",
    "InterferometerSpec",
    "Mirror",
    "MonitorSpec",
    "PhaseModulator",
    "PmWindow",
    "ProtocolMismatchError",
    "PulseSegment",
    "ResourceLimitError",
    "SessionConfig",
    "SessionPlan",
    "SessionStats",
    "SiftedKey",
    "SlotRecords",
    "SourceSpec",
    "StrongProbe",
    "SuppressInconclusive",
    "TWO_STATE",
    "TraceConfig",
    "bin_and_interfere",
    "build_double_mz",
    "build_plug_and_play",
    "decompose",
    "prepare_session",
    "run_session",
    "session_stats",
    "sift",
    "trace",
    "visibility_scan",
]
