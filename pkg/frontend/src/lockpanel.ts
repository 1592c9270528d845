// Lock-sequence panel state: start/abort/relock, stage badges driven by
// the event stream, and live error readings.  All numbers displayed come
// from API payloads.

import { ApiClient, ApiError, LockEvent, LockReportPayload } from "./api.js";

export type PanelPhase =
  | "idle" | "calibrating" | "running" | "locked" | "failed" | "aborted";

export interface StageBadge {
  index: number;
  state: "pending" | "active" | "done";
  enteredTick: number | null;
}

export class LockPanel {
  phase: PanelPhase = "idle";
  stages: StageBadge[] = [];
  report: LockReportPayload | null = null;
  relocks = 0;
  lastError: string | null = null;
  private eventCursor = 0;
  private jobId: number | null = null;

  constructor(private api: ApiClient, stageCount = 3) {
    this.resetStages(stageCount);
  }

  resetStages(count: number): void {
    this.stages = Array.from({ length: count }, (_, i) => ({
      index: i,
      state: "pending" as const,
      enteredTick: null,
    }));
  }

  async calibrate(): Promise<void> {
    this.phase = "calibrating";
    const t = await this.api.startCalibration();
    await this.api.waitJob(t.job_id);
    this.phase = "idle";
  }

  async start(): Promise<void> {
    this.resetStages(this.stages.length);
    this.report = null;
    this.lastError = null;
    this.phase = "running";
    try {
      const t = await this.api.startSequence();
      this.jobId = t.job_id;
    } catch (err) {
      this.phase = "failed";
      this.lastError = err instanceof ApiError ? err.message : String(err);
      throw err;
    }
  }

  /** Poll events and the job; returns true while the sequence runs. */
  async poll(): Promise<boolean> {
    const { events } = await this.api.events(this.eventCursor);
    for (const e of events) {
      this.eventCursor = e.seq + 1;
      this.applyEvent(e);
    }
    if (this.jobId !== null) {
      const j = await this.api.job<LockReportPayload>(this.jobId);
      if (j.status === "done") {
        this.report = j.result ?? null;
        this.phase = this.report && this.report.locked ? "locked" : "failed";
        this.jobId = null;
        // backfill badges from the report in case events were pruned
        if (this.report) {
          this.report.stage_ticks.forEach(([tin], i) => {
            if (i < this.stages.length) {
              this.stages[i].enteredTick = tin;
              this.stages[i].state = "done";
            }
          });
        }
      } else if (j.status === "error") {
        this.phase = "failed";
        this.lastError = j.error ?? "sequence failed";
        this.jobId = null;
      }
    }
    return this.jobId !== null;
  }

  private applyEvent(e: LockEvent): void {
    if (e.type === "lock" && e["kind"] === "aborted") {
      this.phase = "aborted";
      return;
    }
    // lockbox events forwarded by the server carry kind/detail
    const kind = (e["kind"] as string) ?? "";
    const detail = (e["detail"] as string) ?? "";
    if (kind === "stage") {
      const idx = Number(detail.replace("stage", "").trim());
      if (!Number.isNaN(idx) && idx < this.stages.length) {
        for (let i = 0; i < idx; i++) {
          if (this.stages[i].state === "active") this.stages[i].state = "done";
        }
        this.stages[idx].state = "active";
        this.stages[idx].enteredTick = e.tick;
      }
    } else if (kind === "locked") {
      for (const s of this.stages) {
        if (s.state === "active") s.state = "done";
      }
    } else if (kind === "relock") {
      this.relocks += 1;
      this.resetStages(this.stages.length);
    }
  }

  async abort(): Promise<void> {
    await this.api.abort();
    this.phase = "aborted";
    this.jobId = null;
  }

  async relock(): Promise<void> {
    await this.start();
  }
}
