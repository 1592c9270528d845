"""HTTP control API: module state, instrument jobs, lockbox control,
filter design, configuration, and a live event stream.

All bodies are JSON.  Long-running work (acquisitions, sweeps, lock
sequences) runs as jobs inside the engine-owner thread; submitting returns
a job id to poll.  While a job runs, register access stays live because
the drivers pump the command queue between engine chunks; a second job
submission answers 409 with a retry hint.
"""

from __future__ import annotations

import asyncio
import json
import math
from typing import Any

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import HTMLResponse, StreamingResponse
from pydantic import BaseModel, Field

from lockboxsim.core.fixedpoint import TICK_SECONDS
from lockboxsim.iir.design import DesignError, design_filter, eval_transfer
from lockboxsim.instruments.netanalyzer import NaSweepConfig, na_sweep
from lockboxsim.service.configio import load_config, save_config
from lockboxsim.service.server import EngineBusy, EngineServer


class PoleZero(BaseModel):
    freq_hz: float
    gamma_hz: float = 0.0        # positive = stable decay rate


class DesignRequest(BaseModel):
    zeros: list[PoleZero] = Field(default_factory=list)
    poles: list[PoleZero] = Field(default_factory=list)
    dc_gain: float = 1.0
    prefilter_hz: float = 0.0
    auto_conjugate: bool = True
    load: bool = False           # program the IIR slot with the result
    bode_points: int = 300
    bode_lo_hz: float = 1e2
    bode_hi_hz: float = 5e6


class ModulePatch(BaseModel):
    fields: dict[str, Any]


class ScopeJobRequest(BaseModel):
    ch1: str = "in1"
    ch2: str = "in2"
    decimation_shift: int = 0
    trigger_source: str | None = None
    trigger_edge: str = "rising"
    threshold_volts: float = 0.0
    hysteresis: int = 4
    pretrigger_samples: int = 0
    rolling: bool = False
    timeout_ticks: int = 0


class ConfigBody(BaseModel):
    yaml: str


class NaJobRequest(BaseModel):
    start_hz: float
    stop_hz: float
    points: int = 31
    amplitude_volts: float = 0.1
    logscale: bool = True
    rbw_hz: float = 0.0
    na_cycles: int = 0
    sleep_cycles: int = -1
    avg_per_point: int = 1
    reverse_order: bool = False
    zero_span: bool = False
    auto_amplitude: bool = False
    input: str = "iq0"
    output_select: str = "off"
    bandwidth_hz: float | None = None
    phase_degrees: float = 0.0
    allow_feedback_sum: bool = False
    iq: str = "iq0"


def _complex_pairs(pzs: list[PoleZero], kind: str, auto: bool) -> list[complex]:
    vals = [complex(-2 * math.pi * pz.gamma_hz, 2 * math.pi * pz.freq_hz)
            for pz in pzs]
    if not auto:
        pool = [v for v in vals if v.imag != 0]
        while pool:
            v = pool.pop(0)
            match = next((i for i, c in enumerate(pool)
                          if abs(c - v.conjugate()) <= 1e-9 * max(1.0, abs(v))),
                         None)
            if match is None:
                raise DesignError(
                    f"unpaired complex {kind} at {v.imag / 2 / math.pi:.6g} Hz "
                    f"(gamma {-v.real / 2 / math.pi:.6g} Hz) and "
                    "auto_conjugate is disabled")
            pool.pop(match)
    return vals


def create_app(server: EngineServer, lockbox=None) -> FastAPI:
    app = FastAPI(title="lockboxsim control API")
    eng = server.engine
    state = {"lockbox": lockbox}
    if lockbox is not None:
        lockbox.event_sink = lambda e: server.emit(
            {"type": "lock", "kind": e.kind, "detail": e.detail})

    def engine_state() -> dict:
        return {
            "tick": int(eng.tick),
            "time_s": eng.tick * TICK_SECONDS,
            "seed": eng.seed,
            "plant": eng.plant.kind if eng.plant is not None else "none",
            "dac": [int(v) for v in eng.dac],
            "adc": [int(v) for v in eng.adc],
        }

    @app.get("/api/status")
    def status():
        return server.call(engine_state)

    @app.get("/api/registers")
    def registers():
        return [
            {"name": r.name, "address": r.address, "writable": r.writable,
             "doc": r.doc}
            for r in server.regmap.registers()
        ]

    @app.get("/api/modules")
    def modules():
        return server.call(lambda: {name: m.state_dict()
                                    for name, m in eng.modules.items()
                                    if m.fields})

    @app.get("/api/modules/{name}")
    def module_get(name: str):
        if name not in eng.modules:
            raise HTTPException(404, f"no module {name!r}")
        return server.call(lambda: eng.modules[name].state_dict())

    @app.patch("/api/modules/{name}")
    def module_patch(name: str, patch: ModulePatch):
        if name not in eng.modules:
            raise HTTPException(404, f"no module {name!r}")

        def apply():
            m = eng.modules[name]
            for k, v in patch.fields.items():
                if k not in m.fields:
                    raise KeyError(f"{name} has no field {k!r}")
                m.set(k, v)
            return m.state_dict()
        try:
            return server.call(apply)
        except (KeyError, ValueError) as exc:
            raise HTTPException(422, str(exc))

    # ---------------------------------------------------------- filter design
    @app.post("/api/iir/design")
    def iir_design(req: DesignRequest):
        try:
            zeros = _complex_pairs(req.zeros, "zero", req.auto_conjugate)
            poles = _complex_pairs(req.poles, "pole", req.auto_conjugate)
            table, report, _ = design_filter(zeros, poles, req.dc_gain,
                                             prefilter_hz=req.prefilter_hz)
        except (DesignError, ValueError) as exc:
            raise HTTPException(422, str(exc))
        freqs = np.logspace(math.log10(req.bode_lo_hz),
                            math.log10(req.bode_hi_hz), req.bode_points)
        h = eval_transfer(table, freqs)
        if req.load:
            server.call(lambda: eng.iir.load_table(table))
        return {
            "n_loops": table.n_loops,
            "effective_period_s": table.period,
            "sections": [list(s.as_tuple()) for s in table.sections],
            "rounding_max_error": report.max_error,
            "rounding_warning": report.warning,
            "loaded": req.load,
            "bode": {
                "freqs_hz": freqs.tolist(),
                "re": h.real.tolist(),
                "im": h.imag.tolist(),
            },
        }

    # ------------------------------------------------------------------ jobs
    def submit(kind: str, fn):
        try:
            job = server.submit_job(kind, fn)
        except EngineBusy as exc:
            raise HTTPException(409, detail={"error": str(exc),
                                             "retry_after_s": 0.5})
        return {"job_id": job.id, "kind": kind, "status": job.status}

    @app.post("/api/jobs/scope")
    def job_scope(req: ScopeJobRequest):
        def run(_server):
            eng.scope.arm(ch1=req.ch1, ch2=req.ch2,
                          decimation_shift=req.decimation_shift,
                          trigger_source=req.trigger_source,
                          trigger_edge=req.trigger_edge,
                          threshold_volts=req.threshold_volts,
                          hysteresis=req.hysteresis,
                          pretrigger_samples=req.pretrigger_samples,
                          rolling=req.rolling,
                          timeout_ticks=req.timeout_ticks)
            if req.rolling:
                eng.run(int(0.05 / TICK_SECONDS))
                eng.scope.stop_rolling()
            else:
                eng.run_until_scope()
            ch1, ch2, t0 = eng.scope.traces_volts()
            return {
                "t0_tick": int(t0),
                "sample_interval_s": eng.scope.sample_interval,
                "ch1_v": ch1.tolist(),
                "ch2_v": ch2.tolist(),
            }
        return submit("scope", run)

    @app.post("/api/jobs/na_sweep")
    def job_na(req: NaJobRequest):
        cfg = NaSweepConfig(
            start_hz=req.start_hz, stop_hz=req.stop_hz, points=req.points,
            amplitude_volts=req.amplitude_volts, logscale=req.logscale,
            rbw_hz=req.rbw_hz, na_cycles=req.na_cycles,
            sleep_cycles=req.sleep_cycles, avg_per_point=req.avg_per_point,
            reverse_order=req.reverse_order, zero_span=req.zero_span,
            auto_amplitude=req.auto_amplitude, input=req.input,
            output_select=req.output_select, bandwidth_hz=req.bandwidth_hz,
            allow_feedback_sum=req.allow_feedback_sum)

        def run(_server):
            def progress(i, n, f, g):
                server.emit({"type": "sweep", "done": i, "total": n,
                             "freq_hz": f})
                server.pump()
            iq = eng.modules[req.iq]
            res = na_sweep(eng, cfg, req.iq, progress=progress)
            iq.set("phase_degrees", req.phase_degrees)
            return {
                "freqs_hz": [f for f, _ in res],
                "re": [g.real for _, g in res],
                "im": [g.imag for _, g in res],
            }
        return submit("na_sweep", run)

    @app.get("/api/jobs/{job_id}")
    def job_status(job_id: int):
        try:
            job = server.job(job_id)
        except KeyError:
            raise HTTPException(404, f"no job {job_id}")
        out = {"job_id": job.id, "kind": job.kind, "status": job.status}
        if job.status == "done":
            out["result"] = job.result
        elif job.status == "error":
            out["error"] = job.error
        return out

    # --------------------------------------------------------------- lockbox
    @app.get("/api/lockbox/status")
    def lockbox_status():
        box = state["lockbox"]
        if box is None:
            return {"configured": False}

        def read():
            stage = box._active_stage
            return {
                "configured": True,
                "calibrated": sorted(box.calibrations),
                "stage_input": stage.input if stage else None,
                "error_units": box.error_units(),
                "monitor_units": box.monitor_error_units(),
                "tick": int(eng.tick),
            }
        return server.call(read)

    @app.post("/api/lockbox/calibrate")
    def lockbox_calibrate():
        box = state["lockbox"]
        if box is None:
            raise HTTPException(409, "no lockbox configured")

        def run(_server):
            out = {}
            for kind in box.config.inputs:
                cal = box.calibrate_input(kind)
                out[kind] = {"offset_volts": cal.offset_volts,
                             "scale": cal.scale}
                server.emit({"type": "calibrated", "input": kind})
            return out
        return submit("calibrate", run)

    @app.post("/api/lockbox/sequence")
    def lockbox_sequence():
        box = state["lockbox"]
        if box is None:
            raise HTTPException(409, "no lockbox configured")

        def run(_server):
            report = box.run_sequence()
            return {
                "locked": report.locked,
                "attempts": report.attempts,
                "stage_ticks": report.stage_ticks,
                "final_error_units": report.final_error_units,
                "final_error_std_units": report.final_error_std_units,
                "events": [{"tick": e.tick, "kind": e.kind,
                            "detail": e.detail} for e in report.events],
            }
        return submit("lock_sequence", run)

    @app.post("/api/lockbox/abort")
    def lockbox_abort():
        box = state["lockbox"]
        if box is None:
            raise HTTPException(409, "no lockbox configured")

        def stop():
            pid = eng.modules[box.config.pid]
            pid.set("gain_i", 0.0)
            pid.set("gain_p", 0.0)
            server.emit({"type": "lock", "kind": "aborted"})
            return {"aborted": True}
        return server.call(stop)

    # ---------------------------------------------------------------- config
    @app.get("/api/config")
    def config_get():
        box = state["lockbox"]
        text = server.call(
            lambda: save_config(eng, box.config if box else None))
        return {"yaml": text}

    @app.put("/api/config")
    def config_put(body: ConfigBody):
        from lockboxsim.service.configio import ConfigError
        try:
            new_engine, _ = load_config(body.yaml)
        except ConfigError as exc:
            raise HTTPException(422, str(exc))

        def apply():
            # apply the parsed module state onto the live engine
            doc = new_engine.state_dict()
            eng.load_state(doc)
            return {"applied": True}
        return server.call(apply)

    # ---------------------------------------------------------------- events
    @app.get("/api/events")
    def events(since: int = 0):
        return {"events": server.events_since(since)}

    @app.get("/api/events/stream")
    async def events_stream(since: int = 0):
        async def gen():
            seq = since
            while True:
                evs = server.events_since(seq)
                for e in evs:
                    seq = e["seq"] + 1
                    yield f"data: {json.dumps(e)}\n\n"
                await asyncio.sleep(0.05)
        return StreamingResponse(gen(), media_type="text/event-stream")

    @app.get("/", response_class=HTMLResponse)
    def index():
        return ("<html><body><h3>lockboxsim control API</h3>"
                "<p>See /docs for the endpoint list.</p></body></html>")

    return app
