"""Park-Miller Lehmer pseudo-random generator.

state' = 16807 * state mod (2^31 - 1), state in [1, 2^31 - 2].  The top 14
bits of the state, recentred to the signed sample range, feed the noise
mode of the signal generator and the converter noise models.  At one draw
per 8 ns tick the full period lasts about 17 s of simulated time.
"""

from __future__ import annotations

LEHMER_MODULUS = (1 << 31) - 1
LEHMER_MULTIPLIER = 16807


def lehmer_next(state: int) -> tuple[int, int]:
    """One generator step; returns (sample, new_state).

    The sample is the new state's top 14 bits shifted to [-8192, 8191].
    """
    if state <= 0 or state >= LEHMER_MODULUS:
        raise ValueError(f"Lehmer state must be in [1, 2^31-2], got {state}")
    state = (LEHMER_MULTIPLIER * state) % LEHMER_MODULUS
    sample = (state >> 17) - 8192
    return sample, state


def seed_stream(seed: int, stream: int) -> int:
    """Derive a valid, decorrelated Lehmer state from a user seed.

    Separate noise sources (ADC, DAC, disturbance...) take distinct stream
    indices so one user-facing seed reproduces the whole experiment.
    """
    x = (seed * 2654435761 + stream * 40503 + 1) & 0x7FFFFFFF
    x = x % LEHMER_MODULUS
    if x == 0:
        x = 1 + stream
    # burn a few draws so nearby seeds decorrelate
    for _ in range(5):
        x = (LEHMER_MULTIPLIER * x) % LEHMER_MODULUS
    return x
