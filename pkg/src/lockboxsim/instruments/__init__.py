from lockboxsim.instruments.spectrum import (
    SpectrumConfig,
    enbw,
    iq_mode_psd,
    welch_psd,
    window_samples,
)
from lockboxsim.instruments.netanalyzer import NaSweepConfig, na_sweep

__all__ = [
    "NaSweepConfig",
    "SpectrumConfig",
    "enbw",
    "iq_mode_psd",
    "na_sweep",
    "welch_psd",
    "window_samples",
]
