"""Plant models: cavity line shapes, piezo resonances, converter models,
and the two-laser beatnote."""

import math

import numpy as np
import pytest

from lockboxsim import kernel as K
from lockboxsim.core.fixedpoint import TICK_SECONDS
from lockboxsim.engine import Engine
from lockboxsim.plants import (
    CavityPlant,
    LaserPairPlant,
    LoopbackPlant,
    PiezoMode,
    cavity_outputs,
    default_piezo_modes,
    piezo_response,
)


class TestCavityShapes:
    def test_resonance_values(self):
        r, t, p = cavity_outputs(0.2, 0.0)
        assert r == 0.2
        assert t == 1.0
        assert p == 0.0

    def test_pdh_peaks_at_unit_detuning(self):
        thetas = np.linspace(-5, 5, 10001)
        pdh = np.array([cavity_outputs(0.2, th)[2] for th in thetas])
        assert thetas[np.argmax(pdh)] == pytest.approx(1.0, abs=2e-3)
        assert thetas[np.argmin(pdh)] == pytest.approx(-1.0, abs=2e-3)

    def test_pdh_odd_symmetry(self):
        for th in (0.1, 0.7, 2.3, 9.0):
            assert cavity_outputs(0.3, th)[2] == -cavity_outputs(0.3, -th)[2]

    def test_reflection_at_three_bandwidths(self):
        r, _, _ = cavity_outputs(0.2, -3.0)
        assert r == pytest.approx(0.2 + 0.9 * 0.8)

    def test_reflection_asymptote(self):
        r, t, _ = cavity_outputs(0.2, 1e6)
        assert r == pytest.approx(1.0, abs=1e-9)
        assert t == pytest.approx(0.0, abs=1e-9)

    def test_transmission_max_where_reflection_min(self):
        thetas = np.linspace(-4, 4, 4001)
        vals = np.array([cavity_outputs(0.2, th)[:2] for th in thetas])
        assert np.argmin(vals[:, 0]) == np.argmax(vals[:, 1])


class TestCavityEngine:
    def test_static_detuning_reflection_signal(self):
        eng = Engine(seed=2)
        plant = CavityPlant(theta0=-3.0, adc1="reflection", adc_delay=0,
                            dac_delay=0)
        eng.set_plant(plant)
        eng.run(100)
        want = plant.reflection_volts * (0.2 + 0.9 * 0.8)
        assert eng.adc[0] / 8191.0 == pytest.approx(want, abs=2e-4)

    def test_piezo_moves_detuning(self):
        eng = Engine(seed=2)
        eng.set_plant(CavityPlant(theta0=0.0, piezo_gain=10.0, modes=[]))
        eng.pid0.setup()
        eng.pid0.set("ival_volts", 0.25)
        eng.pid0.set("output_select", "out2")     # piezo port default 1
        eng.run(1000)
        assert eng.pf[K.PS_THETA] == pytest.approx(2.5, rel=1e-3)

    def test_displacement_probe_and_dc_gain(self):
        eng = Engine(seed=2)
        eng.set_plant(CavityPlant(adc1="displacement", modes=[],
                                  adc_delay=0, dac_delay=0))
        eng.pid0.setup()
        eng.pid0.set("ival_volts", 0.5)
        eng.pid0.set("output_select", "out2")
        eng.run(100)
        # zero modes: displacement equals drive volts
        assert eng.adc[0] / 8191.0 == pytest.approx(0.5, abs=2e-4)


class TestPiezoModes:
    def test_single_mode_resonant_gain(self):
        # steady-state displacement amplitude at f0 is ~ Q x DC response
        f0, q, w = 50e3, 40.0, 1.0
        eng = Engine(seed=2)
        eng.set_plant(CavityPlant(adc1="displacement",
                                  modes=[PiezoMode(f0, q, w)],
                                  displacement_probe_volts=1.0 / (q * 0.2),
                                  adc_delay=0, dac_delay=0))
        eng.power_down_unused(["asg0"])
        eng.asg0.load_sine(1.0)
        eng.asg0.setup(frequency_hz=f0, scale=0.2)
        eng.asg0.set("output_select", "out2")
        eng.run(int(20 * q / f0 / TICK_SECONDS))     # ring up
        n = 40000
        tr = np.empty(n)
        for i in range(n):
            eng.run(1)
            tr[i] = eng.pf[K.PS_DISP]
        amp = (tr.max() - tr.min()) / 2
        assert amp == pytest.approx(q * 0.2 * w, rel=0.02)

    def test_default_model_minimum_phase(self):
        # above the modal band the stiffness path dominates and the phase
        # returns to its DC value; positive weights keep all zeros in the
        # left half plane, so the phase never winds
        modes = default_piezo_modes()
        f = np.logspace(2, 6.5, 4000)
        h = piezo_response(modes, f, direct=0.1)
        assert abs(np.angle(h[0])) < 0.01
        assert abs(np.angle(h[-1])) < 0.05
        assert h[0].real == pytest.approx(1.0, rel=1e-3)
        # minimum phase: the winding of the phase over the whole sweep is
        # bounded (no accumulated multiples of pi)
        unwrapped = np.unwrap(np.angle(h))
        assert np.abs(unwrapped).max() < np.pi

    def test_default_modes_span_25_90_khz(self):
        modes = default_piezo_modes()
        freqs = sorted(m.freq_hz for m in modes)
        assert freqs[0] == pytest.approx(25e3)
        assert freqs[-1] == pytest.approx(90e3)
        assert any(abs(m.freq_hz - 60e3) < 1 for m in modes)
        assert all(m.weight > 0 for m in modes)


class TestConverters:
    def test_loopback_identity_with_delay(self):
        eng = Engine(seed=2)
        eng.set_plant(LoopbackPlant(adc_delay=3, dac_delay=4))
        eng.asg0.load_waveform(np.arange(16384) % 997)
        eng.asg0.setup(frequency_hz=0.0)
        eng.asg0._setS(1, 1 << 18)
        eng.asg0.set("output_select", "out1")
        outs, ins = [], []
        for _ in range(4000):
            eng.run(1)
            outs.append(int(eng.dac[0]))
            ins.append(int(eng.adc[0]))
        outs, ins = np.array(outs), np.array(ins)
        # cross-correlation peak at the configured total delay
        best = max(range(1, 20),
                   key=lambda d: float(np.sum(outs[:-d] * ins[d:])))
        assert (ins[best:] == outs[:-best]).all()
        assert best == 1 + 4 + 3     # loop hop + dac + adc

    def test_adc_noise_rms_near_12_bit_level(self):
        eng = Engine(seed=5)
        eng.set_plant(LoopbackPlant(adc_noise=4.0))
        vals = []
        for _ in range(30):
            eng.run(1000)
            eng.scope.arm(ch1="in1", decimation_shift=0)
            eng.run_until_scope()
            ch1, _, _ = eng.scope.traces()
            vals.append(ch1)
        v = np.concatenate(vals)
        assert v.std() == pytest.approx(4.0, rel=0.2)

    def test_noise_disabled_is_pure_delay(self):
        eng = Engine(seed=5)
        eng.set_plant(LoopbackPlant())
        eng.pid0.setup()
        eng.pid0.set("ival_volts", 0.37)
        eng.pid0.set("output_select", "out1")
        eng.run(500)
        assert eng.adc[0] == eng.dac[0] == 3031


class TestLaserPair:
    def test_beatnote_at_9mhz(self):
        eng = Engine(seed=2)
        eng.set_plant(LaserPairPlant(beat_offset_hz=9e6, adc_noise=0.0))
        eng.run(100)
        n = 10000
        tr = np.empty(n)
        for i in range(n):
            eng.run(1)
            tr[i] = eng.adc[0]
        # count zero crossings to estimate the tone frequency
        crossings = np.sum(np.diff(np.signbit(tr)) != 0)
        f_est = crossings / 2 / (n * TICK_SECONDS)
        assert f_est == pytest.approx(9e6, rel=2e-3)
        amp = (tr.max() - tr.min()) / 2
        assert amp == pytest.approx(0.5 * 8191, rel=0.01)

    def test_fast_actuator_first_order_response(self):
        eng = Engine(seed=2)
        plant = LaserPairPlant(fast_gain=3e5, fast_fc=1e5, adc_noise=0.0)
        eng.set_plant(plant)
        eng.pid0.setup()
        eng.pid0.set("ival_volts", 1.0)
        eng.pid0.set("output_select", "out1")
        tau = 1 / (2 * math.pi * 1e5)
        eng.run(int(tau / TICK_SECONDS))
        one_tau = eng.pf[K.LS_FAST]
        eng.run(int(12 * tau / TICK_SECONDS))
        final = eng.pf[K.LS_FAST]
        assert final == pytest.approx(3e5 * (8191 / 8191.0), rel=1e-3)
        assert one_tau / final == pytest.approx(1 - math.exp(-1), rel=0.05)

    def test_temperature_integrates(self):
        eng = Engine(seed=2)
        eng.set_plant(LaserPairPlant(temp_slot=6, temp_gain=1e6,
                                     adc_noise=0.0))
        eng.pid0.setup()
        eng.pid0.set("ival_volts", 0.5)
        eng.run(125_000)     # 1 ms at full scale 1e6 Hz/s -> ~500 Hz
        assert eng.pf[K.LS_TEMP] == pytest.approx(0.5 * 1e6 * 1e-3, rel=0.01)
