from lockboxsim.lockbox.loopmath import (
    StabilityMargins,
    closed_from_open,
    nyquist_margins,
    open_loop_from_closed,
)
from lockboxsim.lockbox.calibration import InputCalibration, calibrate
from lockboxsim.lockbox.sequence import (
    LockEvent,
    LockReport,
    LockStage,
    Lockbox,
    LockboxConfig,
)

__all__ = [
    "InputCalibration",
    "LockEvent",
    "LockReport",
    "LockStage",
    "Lockbox",
    "LockboxConfig",
    "StabilityMargins",
    "calibrate",
    "closed_from_open",
    "nyquist_margins",
    "open_loop_from_closed",
]
