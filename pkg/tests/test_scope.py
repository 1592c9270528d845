"""Scope acquisition: decimating average, trigger alignment, rolling mode."""

import numpy as np
import pytest

from lockboxsim.core.fixedpoint import TICK_SECONDS
from lockboxsim.engine import Engine


class TestScope:
    def test_dc_trace_any_decimation(self):
        eng = Engine()
        eng.set_adc(0, 2048)      # 0.25 V
        eng.run(1)                # let in1 publish before arming
        eng.scope.arm(ch1="in1", ch2="in2", decimation_shift=2)
        eng.run_until_scope()
        ch1, ch2, _ = eng.scope.traces()
        assert (ch1 == 2048).all()
        assert (ch2 == 0).all()

    def test_trace_duration_decimation_1(self):
        eng = Engine()
        eng.scope.arm(decimation_shift=0)
        t0 = eng.tick
        eng.run_until_scope()
        # 2^14 points at 8 ns: 131 us
        assert eng.scope.sample_interval == TICK_SECONDS
        duration = (1 << 14) * eng.scope.sample_interval
        assert duration == pytest.approx(131.072e-6)
        assert (eng.tick - t0) == (1 << 14)

    def test_trace_duration_decimation_max(self):
        eng = Engine()
        eng.scope.arm(decimation_shift=16)
        duration = (1 << 14) * eng.scope.sample_interval
        assert duration == pytest.approx(8.589934592)

    def test_decimated_point_is_floor_mean(self):
        # alternate +5 / -2: sum over 4 = 6 -> floor(6/4) = 1
        eng = Engine()
        eng.asg0.load_waveform(np.tile([5, -2, 5, -2], 4096))
        eng.asg0.setup(frequency_hz=0.0)
        eng.asg0._setS(1, 1 << 18)      # step one table entry per tick
        eng.run(4)
        eng.scope.arm(ch1="asg0", decimation_shift=2)
        eng.run_until_scope()
        ch1, _, _ = eng.scope.traces()
        assert (ch1 == 1).all()

    def test_trigger_positions_edge_at_pretrigger_index(self):
        eng = Engine()
        eng.asg0.load_ramp(-0.5, 0.5)
        eng.asg0.setup(frequency_hz=1e3)
        eng.scope.arm(ch1="asg0", decimation_shift=0,
                      trigger_source="asg0", trigger_edge="rising",
                      threshold_volts=0.0, hysteresis=16,
                      pretrigger_samples=1000)
        eng.run_until_scope()
        ch1, _, t0 = eng.scope.traces()
        assert t0 > 0
        # the sample at the pretrigger index is the first at/above threshold
        # after an excursion below threshold - hysteresis
        win = ch1[995:1006]
        assert win.min() < 0 <= win.max()
        assert abs(int(ch1[1000])) <= 24      # crossing within a few LSB

    def test_trigger_timeout(self):
        eng = Engine()
        eng.scope.arm(ch1="in1", trigger_source="in1", threshold_volts=0.5,
                      timeout_ticks=20_000)
        with pytest.raises(TimeoutError):
            eng.run_until_scope(max_ticks=100_000)
        assert eng.scope.timed_out

    def test_rolling_mode_keeps_latest(self):
        eng = Engine()
        eng.scope.arm(ch1="in1", decimation_shift=0, rolling=True)
        eng.set_adc(0, 100)
        eng.run(20000)
        eng.set_adc(0, 700)
        eng.run(5000)
        eng.scope.stop_rolling()
        ch1, _, _ = eng.scope.traces()
        assert ch1[-1] == 700
        assert (ch1[-4000:] == 700).all()
        assert ch1[0] == 100
