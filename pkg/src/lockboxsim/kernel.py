"""Compiled per-tick engine: DSP slots, analog summation, and plant physics.

Everything that advances once per 8 ns tick lives in this module as numba
kernels operating on plain int64/float64 arrays.  The Python facades in
``engine.py`` own configuration and translate registers; the semantics of
every block are defined here, once.

Slot state is a (16, 64) int64 matrix ``S``; the meaning of each column
depends on the slot's module type (offsets below).  Signals are signed
14-bit samples; IQ quadratures are 24-bit; the PID integral and IIR
section arithmetic run in wide int64 with explicit bounds.  All datapath
right-shifts floor (arithmetic shift), matching registered hardware.

Module inputs are gathered from a snapshot of the previous tick's outputs,
so every routing hop costs exactly one tick and slot processing order
cannot change results.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from lockboxsim.core.sinelut import build_table

# ---------------------------------------------------------------- slot types
TYPE_OFF = 0
TYPE_INPUT = 1
TYPE_ASG = 2
TYPE_PID = 3
TYPE_IQ = 4
TYPE_IIR = 5
TYPE_SCOPE = 6
TYPE_DAC = 7

N_SLOTS = 16
MASK32 = 0xFFFFFFFF
QUARTER = 1 << 30
SAMPLE_MAX = 8191
SAMPLE_MIN = -8192
Q24_MAX = (1 << 23) - 1
Q24_MIN = -(1 << 23)
ACC62_LIMIT = 1 << 61

# output_select codes
OUT_OFF = 0
OUT_1 = 1
OUT_2 = 2
OUT_BOTH = 3

# ------------------------------------------------------------- ASG state map
A_PHASE, A_FWORD, A_SCALE, A_OFFSET, A_TRIGMODE, A_DELAY, A_RUNSTATE, \
    A_DELAYCNT, A_PRNG_EN, A_PRNG, A_WAVEID = range(11)
ASG_CONTINUOUS = 0
ASG_SINGLE = 1
ASG_DELAYED = 2

# ------------------------------------------------------------- PID state map
P_SETPOINT, P_KI, P_KP, P_KD, P_IVAL, P_MIN, P_MAX, P_EPREV = range(8)
P_F_MODE = 8      # ..11
P_F_SHIFT = 12    # ..15
P_F_ACC = 16      # ..19
P_LASTIN = 20
P_OUT = 21
FILT_OFF = 0
FILT_LP = 1
FILT_HP = 2

# -------------------------------------------------------------- IQ state map
Q_PHASE, Q_FWORD, Q_PHASEOFS, Q_NAC, Q_NBW1, Q_NBW2, Q_GAIN, Q_AMP, Q_QF, \
    Q_MUX, Q_ACACC, Q_I_ACC1, Q_I_ACC2, Q_Q_ACC1, Q_Q_ACC2, Q_I, Q_Q, \
    Q_NA_SLEEP, Q_NA_CYC, Q_NA_SUMI, Q_NA_SUMQ, Q_NA_TOTAL, Q_NA_OVF, \
    Q_CPHASE, Q_CTURN, Q_CQUAD, Q_CVALID = range(27)
MUX_QUADRATURE = 0
MUX_OUTPUT_DIRECT = 1
MUX_CORDIC = 2

# ------------------------------------------------------------- IIR state map
R_ON, R_NLOOPS, R_NSECT, R_PHASE, R_NAA, R_AAACC, R_X, R_XPREV, R_ACC, \
    R_OUT, R_DCODE, R_OVF = range(12)
R_Y1 = 12   # ..25
R_Y2 = 26   # ..39

# ----------------------------------------------------------- scope state map
C_CH1, C_CH2, C_DECSHIFT, C_MODE, C_ROLLING, C_TRIGSRC, C_TRIGEDGE, \
    C_TRIGTHRESH, C_TRIGHYST, C_PRETRIG, C_WPTR, C_ACC1, C_ACC2, C_ACCCNT, \
    C_TRIGSTATE, C_POSTCNT, C_ARMED, C_T0, C_TIMEOUT, C_WAITED, C_FILLED, \
    C_TSTART = range(22)
SCOPE_IDLE = 0
SCOPE_RUNNING = 1
SCOPE_DONE = 2
TRIG_PREFILL = 0
TRIG_ARMED = 1
TRIG_POST = 2
SCOPE_LEN = 1 << 14

# ------------------------------------------------------------------- status
ST_NA_DONE = 0        # per-slot bitmask
ST_SCOPE = 1          # 0 none, 1 done, 2 trigger timeout
ST_NA_OVF = 2         # per-slot bitmask
N_STATUS = 8

STOP_ON_SCOPE = 1
STOP_ON_NA = 2

# ------------------------------------------------------------------- plants
PLANT_NONE = 0
PLANT_CAVITY = 1
PLANT_LASER_PAIR = 2
PLANT_LOOPBACK = 3

RING_LEN = 256          # converter-delay ring, power of two
RING_MASK = RING_LEN - 1

# cavity plant configuration (pcfg) offsets
PC_RMIN, PC_PDH_V, PC_REFL_V, PC_TRANS_V, PC_EOM_PORT, PC_PIEZO_PORT, \
    PC_PIEZO_GAIN, PC_NMODES = range(8)
PC_MODE_BASE = 8                    # 3 per mode: freq, q, weight (<= 12 modes)
PC_THETA0 = 44
PC_DIST_RMS = 45
PC_DIST_FC = 46
PC_ADC_NOISE = 47
PC_DAC_NOISE = 48
PC_ADC_DELAY = 49
PC_DAC_DELAY = 50
PC_RC_FC = 51
PC_ADC1_SEL = 52
PC_ADC2_SEL = 53
PC_DISP_PROBE_V = 54
PC_WDIRECT = 55       # stiffness feedthrough weight of the piezo path
SIG_PD_COMBINED = 0
SIG_REFLECTION = 1
SIG_TRANSMISSION = 2
SIG_DISPLACEMENT = 3
SIG_OFF = 4

# cavity derived constants (pderiv): rc alpha, disturbance alpha/scale, modes
PD_ALPHA_RC = 0
PD_DIST_ALPHA = 1
PD_DIST_SCALE = 2
PD_MODE_BASE = 3                    # 4 per mode: p_re, p_im, g_re, g_im

# cavity plant state (pf)
PS_MODE_RE = 0      # ..11
PS_MODE_IM = 12     # ..23
PS_RC = 24
PS_THETA = 25
PS_DIST = 26
PS_DISP = 27

# laser-pair plant configuration
LP_NU0, LP_FAST_PORT, LP_FAST_GAIN, LP_FAST_FC, LP_SLOW_PORT, LP_SLOW_GAIN, \
    LP_SLOW_FC, LP_TEMP_SLOT, LP_TEMP_GAIN, LP_AMP_V, LP_ADC_NOISE, \
    LP_FNOISE, LP_ADC_DELAY, LP_DAC_DELAY = range(14)
# laser-pair derived
LD_ALPHA_FAST = 0
LD_ALPHA_SLOW = 1
# laser-pair state
LS_FAST = 0
LS_SLOW = 1
LS_TEMP = 2
LS_PHASE = 3

# loopback plant configuration
LB_ADC_NOISE = 0
LB_DAC_NOISE = 1
LB_ADC_DELAY = 2
LB_DAC_DELAY = 3

# noise stream indices inside pi64
NZ_ADC1, NZ_ADC2, NZ_DAC1, NZ_DAC2, NZ_DIST = range(5)

SINE_TABLE = build_table()

CORDIC_STAGES = 9
_atan = np.zeros(CORDIC_STAGES + 1, dtype=np.int64)
for _k in range(1, CORDIC_STAGES + 1):
    # angle unit: pi / 2^20
    _atan[_k] = round(math.atan(2.0 ** -_k) / math.pi * (1 << 20))
CORDIC_ATAN = _atan
# terminal half-step: the sign of the residual after the last rotation is a
# free tenth decision; crediting half the next pseudo-rotation angle centers
# the quantization without growing any datapath register
CORDIC_ATAN_TAIL = np.int64(round(math.atan(2.0 ** -(CORDIC_STAGES + 1))
                                  / math.pi * (1 << 20)))
TURN_UNITS = 1 << 12          # 2*pi in 14-bit phase-register LSBs
QUAD_UNITS = 1 << 10


@njit(cache=True, inline="always")
def _sat14(v):
    if v > SAMPLE_MAX:
        return SAMPLE_MAX
    if v < SAMPLE_MIN:
        return SAMPLE_MIN
    return v


@njit(cache=True, inline="always")
def _sat24(v):
    if v > Q24_MAX:
        return Q24_MAX
    if v < Q24_MIN:
        return Q24_MIN
    return v


@njit(cache=True, inline="always")
def _lut(lut, phase):
    p = phase & MASK32
    idx13 = p >> 19
    quadrant = idx13 >> 11
    idx = idx13 & 2047
    if quadrant == 0:
        return np.int64(0) if idx == 0 else lut[idx - 1]
    if quadrant == 1:
        return lut[2047 - idx]
    if quadrant == 2:
        return np.int64(0) if idx == 0 else -lut[idx - 1]
    return -lut[2047 - idx]


@njit(cache=True, inline="always")
def _lehmer(state):
    return (np.int64(16807) * state) % np.int64(2147483647)


@njit(cache=True, inline="always")
def _noise_draw(state, rms):
    """Triangular noise with the requested RMS; returns (value, new_state)."""
    s1 = _lehmer(state)
    s2 = _lehmer(s1)
    # two uniforms in (0,1), difference is triangular on (-1,1), rms 1/sqrt(6)
    tri = (s1 - s2) / 2147483647.0
    return tri * rms * 2.449489742783178, s2


@njit(cache=True)
def cordic_update(i, q, phase, turn, quad_prev, valid):
    """One vectoring-mode phase estimate with quadrant turn counting.

    Returns (phase_register, turn, quadrant, valid).  The register covers
    +-4*pi in units of pi/2^11: 2 turn bits, 2 quadrant bits, 10 bits from
    a binary search over pseudo-rotations atan(2^-k).  Zero input holds the
    previous estimate.
    """
    if i == 0 and q == 0:
        return phase, turn, quad_prev, valid
    if i >= 0:
        quad = 0 if q >= 0 else 3
    else:
        quad = 1 if q >= 0 else 2
    x = i
    y = q
    # rotate by -90 deg per quadrant step: (x, y) -> (y, -x)
    for _ in range(quad):
        tx = x
        x = y
        y = -tx
    # rotate by -45 deg (unscaled): angle now in [-45, 45)
    tx = x
    x = x + y
    y = y - tx
    acc = np.int64(1) << 18          # 45 deg in pi/2^20 units
    for k in range(1, CORDIC_STAGES + 1):
        tx = x
        if y >= 0:
            x = x + (y >> k)
            y = y - (tx >> k)
            acc += CORDIC_ATAN[k]
        else:
            x = x - (y >> k)
            y = y + (tx >> k)
            acc -= CORDIC_ATAN[k]
    if y >= 0:
        acc += CORDIC_ATAN_TAIL
    else:
        acc -= CORDIC_ATAN_TAIL
    frac = (acc + 256) >> 9          # round to pi/2^11 grid
    if valid != 0:
        if quad_prev == 3 and quad == 0:
            turn += 1
        elif quad_prev == 0 and quad == 3:
            turn -= 1
        # overflow at +-4*pi resets the estimate to +-2*pi
        if turn > 1:
            turn = 1
        elif turn < -2:
            turn = -2
    p = turn * TURN_UNITS + quad * QUAD_UNITS + frac
    return _sat14(p), turn, quad, np.int64(1)


@njit(cache=True)
def run_chunk(n_ticks, tick0, mod_type, in_sel, out_sel, S, sig, dirout,
              wave, iirc, scope_buf, adc, dac, status,
              plant_type, pcfg, pderiv, pf, pi64, ring,
              lut, stop_flags):
    """Advance the whole engine by up to n_ticks; returns ticks executed.

    ``ring`` is a (4, RING_LEN) int64 matrix of converter delay lines
    (dac1, dac2, adc1, adc2), indexed by tick.
    """
    prev = np.empty(N_SLOTS, np.int64)
    tick = tick0
    executed = np.int64(0)
    for _ in range(n_ticks):
        for j in range(N_SLOTS):
            prev[j] = sig[j]

        # ---------------------------------------------------------- plant
        if plant_type == PLANT_CAVITY:
            dac_delay = np.int64(pcfg[PC_DAC_DELAY])
            adc_delay = np.int64(pcfg[PC_ADC_DELAY])
            piezo_port = np.int64(pcfg[PC_PIEZO_PORT])
            eom_port = np.int64(pcfg[PC_EOM_PORT])
            drive_raw = ring[piezo_port, (tick - 1 - dac_delay) & RING_MASK]
            eom_raw = ring[eom_port, (tick - 1 - dac_delay) & RING_MASK]
            drive_v = drive_raw / 8191.0
            eom_v = eom_raw / 8191.0
            if pcfg[PC_RC_FC] > 0.0:
                pf[PS_RC] += pderiv[PD_ALPHA_RC] * (drive_v - pf[PS_RC])
                drive_v = pf[PS_RC]
            nmodes = np.int64(pcfg[PC_NMODES])
            disp = pcfg[PC_WDIRECT] * drive_v
            for m in range(nmodes):
                pre = pderiv[PD_MODE_BASE + 4 * m + 0]
                pim = pderiv[PD_MODE_BASE + 4 * m + 1]
                gre = pderiv[PD_MODE_BASE + 4 * m + 2]
                gim = pderiv[PD_MODE_BASE + 4 * m + 3]
                mre = pf[PS_MODE_RE + m]
                mim = pf[PS_MODE_IM + m]
                nre = pre * mre - pim * mim + gre * drive_v
                nim = pre * mim + pim * mre + gim * drive_v
                pf[PS_MODE_RE + m] = nre
                pf[PS_MODE_IM + m] = nim
                disp += 2.0 * nre
            pf[PS_DISP] = disp
            if pcfg[PC_DIST_RMS] > 0.0:
                w, pi64[NZ_DIST] = _noise_draw(pi64[NZ_DIST], pderiv[PD_DIST_SCALE])
                pf[PS_DIST] += pderiv[PD_DIST_ALPHA] * (w - pf[PS_DIST])
            theta = pcfg[PC_THETA0] + pcfg[PC_PIEZO_GAIN] * disp + pf[PS_DIST]
            pf[PS_THETA] = theta
            lor = 1.0 / (1.0 + theta * theta)
            refl = pcfg[PC_RMIN] + (1.0 - pcfg[PC_RMIN]) * theta * theta * lor
            trans = lor
            pdh_shape = theta * lor
            pd_rf = pcfg[PC_PDH_V] * pdh_shape * eom_v
            for ch in range(2):
                sel = np.int64(pcfg[PC_ADC1_SEL + ch])
                if sel == SIG_PD_COMBINED:
                    v = pcfg[PC_REFL_V] * refl + pd_rf
                elif sel == SIG_REFLECTION:
                    v = pcfg[PC_REFL_V] * refl
                elif sel == SIG_TRANSMISSION:
                    v = pcfg[PC_TRANS_V] * trans
                elif sel == SIG_DISPLACEMENT:
                    v = pcfg[PC_DISP_PROBE_V] * disp
                else:
                    v = 0.0
                raw = np.int64(round(v * 8191.0))
                if pcfg[PC_ADC_NOISE] > 0.0:
                    nz, pi64[NZ_ADC1 + ch] = _noise_draw(
                        pi64[NZ_ADC1 + ch], pcfg[PC_ADC_NOISE])
                    raw += np.int64(round(nz))
                ring[2 + ch, tick & RING_MASK] = _sat14(raw)
                adc[ch] = ring[2 + ch, (tick - adc_delay) & RING_MASK]
        elif plant_type == PLANT_LASER_PAIR:
            dac_delay = np.int64(pcfg[LP_DAC_DELAY])
            adc_delay = np.int64(pcfg[LP_ADC_DELAY])
            fast_v = ring[np.int64(pcfg[LP_FAST_PORT]),
                          (tick - 1 - dac_delay) & RING_MASK] / 8191.0
            slow_v = ring[np.int64(pcfg[LP_SLOW_PORT]),
                          (tick - 1 - dac_delay) & RING_MASK] / 8191.0
            pf[LS_FAST] += pderiv[LD_ALPHA_FAST] * (pcfg[LP_FAST_GAIN] * fast_v - pf[LS_FAST])
            pf[LS_SLOW] += pderiv[LD_ALPHA_SLOW] * (pcfg[LP_SLOW_GAIN] * slow_v - pf[LS_SLOW])
            temp_slot = np.int64(pcfg[LP_TEMP_SLOT])
            if temp_slot >= 0:
                pf[LS_TEMP] += pcfg[LP_TEMP_GAIN] * (prev[temp_slot] / 8191.0) * 8e-9
            nu = pcfg[LP_NU0] + pf[LS_FAST] + pf[LS_SLOW] + pf[LS_TEMP]
            if pcfg[LP_FNOISE] > 0.0:
                w, pi64[NZ_DIST] = _noise_draw(pi64[NZ_DIST], pcfg[LP_FNOISE])
                nu += w
            ph = pf[LS_PHASE] + 6.283185307179586 * nu * 8e-9
            if ph > 3.141592653589793:
                ph -= 6.283185307179586
            elif ph < -3.141592653589793:
                ph += 6.283185307179586
            pf[LS_PHASE] = ph
            raw = np.int64(round(pcfg[LP_AMP_V] * math.cos(ph) * 8191.0))
            if pcfg[LP_ADC_NOISE] > 0.0:
                nz, pi64[NZ_ADC1] = _noise_draw(pi64[NZ_ADC1], pcfg[LP_ADC_NOISE])
                raw += np.int64(round(nz))
            ring[2, tick & RING_MASK] = _sat14(raw)
            adc[0] = ring[2, (tick - adc_delay) & RING_MASK]
            adc[1] = 0
        elif plant_type == PLANT_LOOPBACK:
            dac_delay = np.int64(pcfg[LB_DAC_DELAY])
            adc_delay = np.int64(pcfg[LB_ADC_DELAY])
            for ch in range(2):
                raw = ring[ch, (tick - 1 - dac_delay) & RING_MASK]
                if pcfg[LB_ADC_NOISE] > 0.0:
                    nz, pi64[NZ_ADC1 + ch] = _noise_draw(
                        pi64[NZ_ADC1 + ch], pcfg[LB_ADC_NOISE])
                    raw += np.int64(round(nz))
                ring[2 + ch, tick & RING_MASK] = _sat14(raw)
                adc[ch] = ring[2 + ch, (tick - adc_delay) & RING_MASK]

        # ------------------------------------------------------ DSP slots
        sum1 = np.int64(0)
        sum2 = np.int64(0)
        for j in range(N_SLOTS):
            mt = mod_type[j]
            if mt == TYPE_OFF:
                continue
            src = in_sel[j]
            x = prev[src] if src >= 0 else np.int64(0)

            if mt == TYPE_INPUT:
                sig[j] = adc[S[j, 0]]
                dirout[j] = 0

            elif mt == TYPE_ASG:
                run = S[j, A_RUNSTATE]
                if run == 1:
                    S[j, A_DELAYCNT] -= 1
                    if S[j, A_DELAYCNT] <= 0:
                        S[j, A_RUNSTATE] = 2
                        S[j, A_PHASE] = 0
                        run = 2
                if run == 2:
                    if S[j, A_PRNG_EN] != 0:
                        st = _lehmer(S[j, A_PRNG])
                        S[j, A_PRNG] = st
                        w = (st >> 17) - 8192
                    else:
                        w = wave[S[j, A_WAVEID], (S[j, A_PHASE] >> 18) & 16383]
                    out = _sat14(S[j, A_OFFSET] + ((S[j, A_SCALE] * w) >> 14))
                    nphase = S[j, A_PHASE] + S[j, A_FWORD]
                    if S[j, A_TRIGMODE] == ASG_SINGLE and nphase > MASK32:
                        S[j, A_RUNSTATE] = 0
                    S[j, A_PHASE] = nphase & MASK32
                else:
                    out = _sat14(S[j, A_OFFSET])
                sig[j] = out
                dirout[j] = out

            elif mt == TYPE_PID:
                v = x
                for st in range(4):
                    mode = S[j, P_F_MODE + st]
                    if mode != FILT_OFF:
                        n = S[j, P_F_SHIFT + st]
                        S[j, P_F_ACC + st] += v - (S[j, P_F_ACC + st] >> n)
                        lp = S[j, P_F_ACC + st] >> n
                        if mode == FILT_LP:
                            v = _sat14(lp)
                        else:
                            v = _sat14(v - lp)
                S[j, P_LASTIN] = v
                e = v - S[j, P_SETPOINT]
                ival = S[j, P_IVAL] + e * S[j, P_KI]
                lo = S[j, P_MIN] << 32
                hi = S[j, P_MAX] << 32
                if ival > hi:
                    ival = hi
                elif ival < lo:
                    ival = lo
                S[j, P_IVAL] = ival
                tot = ival + ((e * S[j, P_KP]) << 16) \
                    + (((e - S[j, P_EPREV]) * S[j, P_KD]) << 16)
                S[j, P_EPREV] = e
                out = tot >> 32
                if out > S[j, P_MAX]:
                    out = S[j, P_MAX]
                elif out < S[j, P_MIN]:
                    out = S[j, P_MIN]
                out = _sat14(out)
                S[j, P_OUT] = out
                sig[j] = out
                dirout[j] = out

            elif mt == TYPE_IQ:
                S[j, Q_PHASE] = (S[j, Q_PHASE] + S[j, Q_FWORD]) & MASK32
                phase = S[j, Q_PHASE]
                if S[j, Q_NAC] > 0:
                    n = S[j, Q_NAC]
                    S[j, Q_ACACC] += x - (S[j, Q_ACACC] >> n)
                    xh = _sat14(x - (S[j, Q_ACACC] >> n))
                else:
                    xh = x
                dphase = (phase - S[j, Q_PHASEOFS]) & MASK32
                sd = _lut(lut, dphase)
                cd = _lut(lut, dphase + QUARTER)
                mi = (xh * sd) >> 6
                mq = (xh * cd) >> 6
                n1 = S[j, Q_NBW1]
                n2 = S[j, Q_NBW2]
                if n1 > 0:
                    S[j, Q_I_ACC1] += mi - (S[j, Q_I_ACC1] >> n1)
                    mi = S[j, Q_I_ACC1] >> n1
                    S[j, Q_Q_ACC1] += mq - (S[j, Q_Q_ACC1] >> n1)
                    mq = S[j, Q_Q_ACC1] >> n1
                if n2 > 0:
                    S[j, Q_I_ACC2] += mi - (S[j, Q_I_ACC2] >> n2)
                    mi = S[j, Q_I_ACC2] >> n2
                    S[j, Q_Q_ACC2] += mq - (S[j, Q_Q_ACC2] >> n2)
                    mq = S[j, Q_Q_ACC2] >> n2
                qi = _sat24(mi)
                qq = _sat24(mq)
                S[j, Q_I] = qi
                S[j, Q_Q] = qq
                if S[j, Q_NA_SLEEP] > 0:
                    S[j, Q_NA_SLEEP] -= 1
                elif S[j, Q_NA_CYC] > 0:
                    si = S[j, Q_NA_SUMI] + qi
                    sq = S[j, Q_NA_SUMQ] + qq
                    if si > ACC62_LIMIT or si < -ACC62_LIMIT or \
                            sq > ACC62_LIMIT or sq < -ACC62_LIMIT:
                        S[j, Q_NA_OVF] = 1
                        S[j, Q_NA_CYC] = 0
                        status[ST_NA_OVF] |= np.int64(1) << j
                        status[ST_NA_DONE] |= np.int64(1) << j
                    else:
                        S[j, Q_NA_SUMI] = si
                        S[j, Q_NA_SUMQ] = sq
                        S[j, Q_NA_CYC] -= 1
                        if S[j, Q_NA_CYC] == 0:
                            status[ST_NA_DONE] |= np.int64(1) << j
                if S[j, Q_MUX] == MUX_CORDIC:
                    cp, ct, cq, cv = cordic_update(
                        qi, qq, S[j, Q_CPHASE], S[j, Q_CTURN],
                        S[j, Q_CQUAD], S[j, Q_CVALID])
                    S[j, Q_CPHASE] = cp
                    S[j, Q_CTURN] = ct
                    S[j, Q_CQUAD] = cq
                    S[j, Q_CVALID] = cv
                sm = _lut(lut, phase)
                cm = _lut(lut, phase + QUARTER)
                exc = (S[j, Q_AMP] * sm) >> 16
                mod = ((qi * sm + qq * cm) * S[j, Q_GAIN]) >> 37
                od = _sat14(exc + mod)
                dirout[j] = od
                mux = S[j, Q_MUX]
                if mux == MUX_QUADRATURE:
                    sig[j] = _sat14((qq * S[j, Q_QF]) >> 22)
                elif mux == MUX_OUTPUT_DIRECT:
                    sig[j] = od
                else:
                    sig[j] = S[j, Q_CPHASE]

            elif mt == TYPE_IIR:
                if S[j, R_NAA] > 0:
                    n = S[j, R_NAA]
                    S[j, R_AAACC] += x - (S[j, R_AAACC] >> n)
                    xf = S[j, R_AAACC] >> n
                else:
                    xf = x
                if S[j, R_ON] != 0:
                    ph = S[j, R_PHASE]
                    if ph == 0:
                        S[j, R_XPREV] = S[j, R_X]
                        S[j, R_X] = xf << 10
                        S[j, R_ACC] = (S[j, R_DCODE] * S[j, R_X]) >> 29
                    if ph < S[j, R_NSECT]:
                        acc = iirc[ph, 0] * S[j, R_X] \
                            + iirc[ph, 1] * S[j, R_XPREV] \
                            - iirc[ph, 2] * S[j, R_Y1 + ph] \
                            - iirc[ph, 3] * S[j, R_Y2 + ph]
                        yw = acc >> 29
                        y = _sat24(yw)
                        if y != yw:
                            S[j, R_OVF] = 1
                        S[j, R_Y2 + ph] = S[j, R_Y1 + ph]
                        S[j, R_Y1 + ph] = y
                        S[j, R_ACC] += y
                    if ph == S[j, R_NLOOPS] - 1:
                        S[j, R_OUT] = _sat14(S[j, R_ACC] >> 10)
                        S[j, R_PHASE] = 0
                    else:
                        S[j, R_PHASE] = ph + 1
                    sig[j] = S[j, R_OUT]
                else:
                    sig[j] = 0
                dirout[j] = sig[j]

            elif mt == TYPE_SCOPE:
                if S[j, C_MODE] == SCOPE_RUNNING:
                    ch1 = prev[S[j, C_CH1]] if S[j, C_CH1] >= 0 else np.int64(0)
                    ch2 = prev[S[j, C_CH2]] if S[j, C_CH2] >= 0 else np.int64(0)
                    S[j, C_ACC1] += ch1
                    S[j, C_ACC2] += ch2
                    S[j, C_ACCCNT] += 1
                    if S[j, C_TRIGSTATE] == TRIG_ARMED and S[j, C_ROLLING] == 0:
                        tsrc = S[j, C_TRIGSRC]
                        if tsrc < 0:
                            S[j, C_TRIGSTATE] = TRIG_POST
                            S[j, C_T0] = tick
                            S[j, C_POSTCNT] = SCOPE_LEN - S[j, C_PRETRIG]
                        else:
                            v = prev[tsrc]
                            th = S[j, C_TRIGTHRESH]
                            hy = S[j, C_TRIGHYST]
                            if S[j, C_TRIGEDGE] == 0:
                                if S[j, C_ARMED] == 0:
                                    if v <= th - hy:
                                        S[j, C_ARMED] = 1
                                elif v >= th:
                                    S[j, C_TRIGSTATE] = TRIG_POST
                                    S[j, C_T0] = tick
                                    S[j, C_POSTCNT] = SCOPE_LEN - S[j, C_PRETRIG]
                            else:
                                if S[j, C_ARMED] == 0:
                                    if v >= th + hy:
                                        S[j, C_ARMED] = 1
                                elif v <= th:
                                    S[j, C_TRIGSTATE] = TRIG_POST
                                    S[j, C_T0] = tick
                                    S[j, C_POSTCNT] = SCOPE_LEN - S[j, C_PRETRIG]
                            if S[j, C_TRIGSTATE] == TRIG_ARMED and S[j, C_TIMEOUT] > 0:
                                S[j, C_WAITED] += 1
                                if S[j, C_WAITED] > S[j, C_TIMEOUT]:
                                    S[j, C_MODE] = SCOPE_DONE
                                    status[ST_SCOPE] = 2
                    if S[j, C_ACCCNT] == (np.int64(1) << S[j, C_DECSHIFT]):
                        w = S[j, C_WPTR]
                        scope_buf[0, w] = S[j, C_ACC1] >> S[j, C_DECSHIFT]
                        scope_buf[1, w] = S[j, C_ACC2] >> S[j, C_DECSHIFT]
                        S[j, C_WPTR] = (w + 1) & (SCOPE_LEN - 1)
                        S[j, C_ACC1] = 0
                        S[j, C_ACC2] = 0
                        S[j, C_ACCCNT] = 0
                        S[j, C_FILLED] += 1
                        st8 = S[j, C_TRIGSTATE]
                        if st8 == TRIG_PREFILL:
                            if S[j, C_FILLED] >= S[j, C_PRETRIG]:
                                S[j, C_TRIGSTATE] = TRIG_ARMED
                        elif st8 == TRIG_POST:
                            S[j, C_POSTCNT] -= 1
                            if S[j, C_POSTCNT] <= 0:
                                S[j, C_MODE] = SCOPE_DONE
                                status[ST_SCOPE] = 1
                sig[j] = 0
                dirout[j] = 0

            elif mt == TYPE_DAC:
                dirout[j] = 0
                # refreshed after summation below

            os = out_sel[j]
            if os == OUT_1:
                sum1 += dirout[j]
            elif os == OUT_2:
                sum2 += dirout[j]
            elif os == OUT_BOTH:
                sum1 += dirout[j]
                sum2 += dirout[j]

        dac[0] = _sat14(sum1)
        dac[1] = _sat14(sum2)
        for j in range(N_SLOTS):
            if mod_type[j] == TYPE_DAC:
                sig[j] = dac[S[j, 0]]

        # write DAC values (plus converter noise) into the delay rings
        if plant_type != PLANT_NONE:
            if plant_type == PLANT_CAVITY:
                dn = pcfg[PC_DAC_NOISE]
            elif plant_type == PLANT_LOOPBACK:
                dn = pcfg[LB_DAC_NOISE]
            else:
                dn = 0.0
            for ch in range(2):
                raw = dac[ch]
                if dn > 0.0:
                    nz, pi64[NZ_DAC1 + ch] = _noise_draw(pi64[NZ_DAC1 + ch], dn)
                    raw = _sat14(raw + np.int64(round(nz)))
                ring[ch, tick & RING_MASK] = raw

        tick += 1
        executed += 1
        if stop_flags != 0:
            if (stop_flags & STOP_ON_SCOPE) != 0 and status[ST_SCOPE] != 0:
                break
            if (stop_flags & STOP_ON_NA) != 0 and status[ST_NA_DONE] != 0:
                break
    return executed
