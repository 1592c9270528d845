"""Software-defined lockbox: bit-accurate DSP emulation with simulated optical plants.

The package mirrors a 125 MHz / 14-bit FPGA feedback platform in discrete
time: a routing multiplexer connects signal generators, PID controllers,
IQ demodulators and an IIR filter, all advanced one 8 ns tick at a time.
Simulated plants (Fabry-Perot cavity on a resonant piezo, a two-laser
beatnote source) close the loop, and embedded instruments (scope, spectrum
analyzer, network analyzer) measure it.
"""

from lockboxsim.core.fixedpoint import sat_add, sat14, volts_to_sample, sample_to_volts

__all__ = ["Engine", "sat_add", "sat14", "volts_to_sample", "sample_to_volts"]

__version__ = "0.1.0"


def __getattr__(name):
    # Engine pulls in the compiled kernel; import it lazily so the pure math
    # (IIR design, loop analysis) stays importable without a JIT warm-up.
    if name == "Engine":
        from lockboxsim.engine import Engine

        return Engine
    raise AttributeError(name)
