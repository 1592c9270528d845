"""Register map: every configurable field at a fixed 32-bit address.

Layout:
  slot << 16 | field_index * 4      per-module registers (field order)
  0x00F00000                        global registers (tick, status, seed)
  0x01000000 / 0x01010000           scope channel buffers (2^14 words each)
  0x01020000 / 0x01030000           ASG waveform tables (2^14 words)
  0x01040000                        IIR coefficient table (14*4 words)

Reads reflect tick-boundary state; writes apply between ticks (callers
serialize through the engine owner).  Values on the wire are the raw
integer codes of each field, two's complement in 32 bits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lockboxsim.engine import Engine

GLOBAL_BASE = 0x00F00000
SCOPE_CH1_BASE = 0x01000000
SCOPE_CH2_BASE = 0x01010000
ASG0_WAVE_BASE = 0x01020000
ASG1_WAVE_BASE = 0x01030000
IIR_COEF_BASE = 0x01040000
BLOCK_WORDS = 1 << 14


class RegmapError(KeyError):
    pass


@dataclass(frozen=True)
class RegisterInfo:
    name: str
    address: int
    writable: bool
    doc: str


def _u32(v: int) -> int:
    return int(v) & 0xFFFFFFFF


class RegisterMap:
    """Address decoding over an engine's module fields and data blocks."""

    def __init__(self, engine: Engine):
        self.engine = engine
        self._regs: dict[int, tuple] = {}
        self._index: list[RegisterInfo] = []
        for name, module in engine.modules.items():
            base = module.slot << 16
            for i, (fname, field) in enumerate(module.fields.items()):
                addr = base + 4 * i
                self._regs[addr] = (field.code_get, field.code_set)
                self._index.append(RegisterInfo(
                    f"{name}.{fname}", addr, field.code_set is not None,
                    field.doc))
        self._add_global(0, "tick_low", lambda: _u32(engine.tick), None)
        self._add_global(1, "tick_high", lambda: _u32(engine.tick >> 32), None)
        self._add_global(2, "seed", lambda: _u32(engine.seed), None)
        self._add_global(3, "plant_type", lambda: _u32(engine.plant_type), None)
        self._add_global(4, "status_na", lambda: _u32(int(engine.status[0])), None)
        self._add_global(5, "status_scope", lambda: _u32(int(engine.status[1])), None)
        self._add_global(6, "dac1", lambda: _u32(int(engine.dac[0])), None)
        self._add_global(7, "dac2", lambda: _u32(int(engine.dac[1])), None)
        self._add_global(8, "adc1", lambda: _u32(int(engine.adc[0])), None)
        self._add_global(9, "adc2", lambda: _u32(int(engine.adc[1])), None)

    def _add_global(self, idx: int, name: str, getter, setter) -> None:
        addr = GLOBAL_BASE + 4 * idx
        self._regs[addr] = (getter, setter)
        self._index.append(RegisterInfo(f"global.{name}", addr,
                                        setter is not None, ""))

    # -- lookup ------------------------------------------------------------
    def registers(self) -> list[RegisterInfo]:
        return list(self._index)

    def address_of(self, dotted: str) -> int:
        for info in self._index:
            if info.name == dotted:
                return info.address
        raise RegmapError(f"no register named {dotted!r}")

    # -- access ------------------------------------------------------------
    def read(self, address: int, count: int) -> list[int]:
        span = self._block_span(address, count)
        if span is not None:
            return span
        out = []
        for k in range(count):
            addr = address + 4 * k
            block = self._read_block(addr)
            if block is not None:
                out.append(block)
                continue
            entry = self._regs.get(addr)
            if entry is None:
                raise RegmapError(f"unmapped address 0x{addr:08X}")
            out.append(_u32(entry[0]()))
        return out

    def _block_span(self, address: int, count: int) -> list[int] | None:
        """Vectorized read when the whole request sits inside one block."""
        if address & 3 or count < 1:
            return None
        end = address + 4 * count
        for base, ch in ((SCOPE_CH1_BASE, 0), (SCOPE_CH2_BASE, 1)):
            if base <= address and end <= base + 4 * BLOCK_WORDS:
                lo = (address - base) >> 2
                trace = self._scope_unrolled(ch)[lo:lo + count]
                return [int(v) & 0xFFFFFFFF for v in trace]
        for base, wid in ((ASG0_WAVE_BASE, 0), (ASG1_WAVE_BASE, 1)):
            if base <= address and end <= base + 4 * BLOCK_WORDS:
                lo = (address - base) >> 2
                w = self.engine.wave[wid, lo:lo + count]
                return [int(v) & 0xFFFFFFFF for v in w]
        return None

    def write(self, address: int, words: list[int]) -> None:
        # validate the whole span first: block writes must be atomic
        plan = []
        for k, w in enumerate(words):
            addr = address + 4 * k
            writer = self._write_block_fn(addr)
            if writer is None:
                entry = self._regs.get(addr)
                if entry is None:
                    raise RegmapError(f"unmapped address 0x{addr:08X}")
                if entry[1] is None:
                    raise RegmapError(f"read-only address 0x{addr:08X}")
                writer = entry[1]
            plan.append((writer, w))
        for writer, w in plan:
            writer(_u32(w))

    # -- data blocks ---------------------------------------------------------
    def _read_block(self, addr: int):
        eng = self.engine
        for base, arr in ((SCOPE_CH1_BASE, None), (SCOPE_CH2_BASE, None)):
            if base <= addr < base + 4 * BLOCK_WORDS and (addr & 3) == 0:
                ch = 0 if base == SCOPE_CH1_BASE else 1
                idx = (addr - base) >> 2
                trace = self._scope_unrolled(ch)
                return _u32(int(trace[idx]))
        for base, wid in ((ASG0_WAVE_BASE, 0), (ASG1_WAVE_BASE, 1)):
            if base <= addr < base + 4 * BLOCK_WORDS and (addr & 3) == 0:
                idx = (addr - base) >> 2
                return _u32(int(eng.wave[wid, idx]))
        if IIR_COEF_BASE <= addr < IIR_COEF_BASE + 4 * 56 and (addr & 3) == 0:
            idx = (addr - IIR_COEF_BASE) >> 2
            return _u32(int(eng.iirc[idx // 4, idx % 4]))
        return None

    def _scope_unrolled(self, ch: int) -> np.ndarray:
        tr1, tr2, _ = self.engine.scope.traces()
        return tr1 if ch == 0 else tr2

    def _write_block_fn(self, addr: int):
        eng = self.engine

        def wave_writer(wid, idx):
            def w(value):
                v = value - (1 << 32) if value >= (1 << 31) else value
                eng.wave[wid, idx] = max(-8192, min(8191, v))
            return w

        for base, wid in ((ASG0_WAVE_BASE, 0), (ASG1_WAVE_BASE, 1)):
            if base <= addr < base + 4 * BLOCK_WORDS and (addr & 3) == 0:
                return wave_writer(wid, (addr - base) >> 2)
        if IIR_COEF_BASE <= addr < IIR_COEF_BASE + 4 * 56 and (addr & 3) == 0:
            idx = (addr - IIR_COEF_BASE) >> 2

            def w(value):
                v = value - (1 << 32) if value >= (1 << 31) else value
                eng.iirc[idx // 4, idx % 4] = v
            return w
        return None
