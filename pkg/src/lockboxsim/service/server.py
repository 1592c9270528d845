"""Engine owner thread: serializes register access, jobs, and ticking.

One thread owns the engine and is the only caller of ``engine.run``.
Listener threads (TCP handlers, HTTP workers) enqueue closures; the owner
drains the queue at tick boundaries, so every read sees a consistent
snapshot and every write lands between ticks.  Long-running jobs (sweeps,
lock sequences) execute inside the owner thread too, pumping the queue
between engine chunks so the register interfaces stay live.
"""

from __future__ import annotations

import itertools
import queue
import threading
import traceback
from dataclasses import dataclass, field

from lockboxsim.engine import Engine
from lockboxsim.service.regmap import RegisterMap


@dataclass
class Job:
    id: int
    kind: str
    status: str = "pending"          # pending | running | done | error
    result: object = None
    error: str = ""
    progress: float = 0.0


class EngineBusy(RuntimeError):
    pass


class EngineServer:
    """Thread-owning wrapper used by the TCP and HTTP front ends."""

    def __init__(self, engine: Engine, idle_chunk: int = 8192,
                 free_run: bool = True):
        self.engine = engine
        self.regmap = RegisterMap(engine)
        self.idle_chunk = idle_chunk
        self.free_run = free_run
        self._cmd: queue.Queue = queue.Queue()
        self._jobs: dict[int, Job] = {}
        self._job_ids = itertools.count(1)
        self._active_job: Job | None = None
        self._events: list[dict] = []
        self._events_lock = threading.Lock()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    # -- lifecycle -----------------------------------------------------------
    def start(self) -> None:
        self._thread = threading.Thread(target=self._loop, daemon=True,
                                        name="engine-owner")
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=10)

    def _loop(self) -> None:
        while not self._stop.is_set():
            self.pump()
            job = self._next_job()
            if job is not None:
                self._run_job(job)
            elif self.free_run:
                self.engine.run(self.idle_chunk)
            else:
                self._wait_for_command()

    def _wait_for_command(self) -> None:
        try:
            fn, done = self._cmd.get(timeout=0.05)
        except queue.Empty:
            return
        self._execute(fn, done)

    def pump(self) -> None:
        """Drain queued commands; called between engine chunks."""
        while True:
            try:
                fn, done = self._cmd.get_nowait()
            except queue.Empty:
                return
            self._execute(fn, done)

    @staticmethod
    def _execute(fn, done) -> None:
        try:
            done["result"] = fn()
        except Exception as exc:       # propagated to the caller
            done["error"] = exc
        done["event"].set()

    # -- synchronous access ----------------------------------------------------
    def call(self, fn, timeout: float = 30.0):
        """Run fn() in the engine thread at the next tick boundary."""
        done = {"event": threading.Event(), "result": None, "error": None}
        self._cmd.put((fn, done))
        if not done["event"].wait(timeout):
            raise TimeoutError("engine thread unresponsive")
        if done["error"] is not None:
            raise done["error"]
        return done["result"]

    def read_registers(self, address: int, count: int) -> list[int]:
        return self.call(lambda: self.regmap.read(address, count))

    def write_registers(self, address: int, words) -> None:
        self.call(lambda: self.regmap.write(address, list(words)))

    # -- jobs --------------------------------------------------------------------
    def submit_job(self, kind: str, fn) -> Job:
        """Queue a long-running closure fn(server) -> result."""
        if self._active_job is not None and \
                self._active_job.status in ("pending", "running"):
            raise EngineBusy(f"job {self._active_job.id} "
                             f"({self._active_job.kind}) still running")
        job = Job(id=next(self._job_ids), kind=kind)
        job._fn = fn
        self._jobs[job.id] = job
        self._active_job = job
        return job

    def _next_job(self) -> Job | None:
        job = self._active_job
        if job is not None and job.status == "pending":
            return job
        return None

    def _run_job(self, job: Job) -> None:
        job.status = "running"
        self.emit({"type": "job", "id": job.id, "kind": job.kind,
                   "status": "running"})
        try:
            job.result = job._fn(self)
            job.status = "done"
        except Exception as exc:
            job.status = "error"
            job.error = f"{type(exc).__name__}: {exc}"
            traceback.print_exc()
        self.emit({"type": "job", "id": job.id, "kind": job.kind,
                   "status": job.status})

    def job(self, job_id: int) -> Job:
        return self._jobs[job_id]

    # -- events -------------------------------------------------------------------
    def emit(self, event: dict) -> None:
        with self._events_lock:
            event = dict(event)
            event["seq"] = len(self._events)
            event["tick"] = int(self.engine.tick)
            self._events.append(event)

    def events_since(self, seq: int) -> list[dict]:
        with self._events_lock:
            return self._events[seq:]
