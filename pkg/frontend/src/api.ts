// Typed client for the lockboxsim control API.
//
// Every number the console displays comes out of these payloads; the
// client performs no signal processing of its own.

export interface BodePayload {
  freqs_hz: number[];
  re: number[];
  im: number[];
}

export interface DesignResponse {
  n_loops: number;
  effective_period_s: number;
  sections: number[][];
  rounding_max_error: number;
  rounding_warning: boolean;
  loaded: boolean;
  bode: BodePayload;
}

export interface PoleZeroItem {
  freq_hz: number;
  gamma_hz: number;
}

export interface DesignRequest {
  zeros: PoleZeroItem[];
  poles: PoleZeroItem[];
  dc_gain: number;
  prefilter_hz?: number;
  auto_conjugate?: boolean;
  load?: boolean;
  bode_points?: number;
  bode_lo_hz?: number;
  bode_hi_hz?: number;
}

export interface JobTicket {
  job_id: number;
  kind: string;
  status: string;
}

export interface SweepResult {
  freqs_hz: number[];
  re: number[];
  im: number[];
}

export interface ScopeResult {
  t0_tick: number;
  sample_interval_s: number;
  ch1_v: number[];
  ch2_v: number[];
}

export interface LockboxStatus {
  configured: boolean;
  calibrated?: string[];
  stage_input?: string | null;
  error_units?: number;
  monitor_units?: number;
  tick?: number;
}

export interface LockEvent {
  seq: number;
  tick: number;
  type: string;
  [key: string]: unknown;
}

export interface LockReportPayload {
  locked: boolean;
  attempts: number;
  stage_ticks: [number, number][];
  final_error_units: number;
  final_error_std_units: number;
  events: { tick: number; kind: string; detail: string }[];
}

export class ApiError extends Error {
  constructor(public status: number, detail: unknown) {
    super(typeof detail === "string" ? detail : JSON.stringify(detail));
  }
}

export class ApiClient {
  constructor(private base: string = "") {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const r = await fetch(this.base + path, {
      method,
      headers: body !== undefined ? { "content-type": "application/json" } : {},
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    const data = await r.json().catch(() => ({}));
    if (!r.ok) {
      throw new ApiError(r.status, (data as { detail?: unknown }).detail ?? data);
    }
    return data as T;
  }

  status(): Promise<{ tick: number; plant: string }> {
    return this.request("GET", "/api/status");
  }

  modules(): Promise<Record<string, Record<string, unknown>>> {
    return this.request("GET", "/api/modules");
  }

  patchModule(name: string, fields: Record<string, unknown>): Promise<Record<string, unknown>> {
    return this.request("PATCH", `/api/modules/${name}`, { fields });
  }

  design(req: DesignRequest): Promise<DesignResponse> {
    return this.request("POST", "/api/iir/design", req);
  }

  submitScope(req: Record<string, unknown>): Promise<JobTicket> {
    return this.request("POST", "/api/jobs/scope", req);
  }

  submitSweep(req: Record<string, unknown>): Promise<JobTicket> {
    return this.request("POST", "/api/jobs/na_sweep", req);
  }

  job<T>(id: number): Promise<{ status: string; result?: T; error?: string }> {
    return this.request("GET", `/api/jobs/${id}`);
  }

  async waitJob<T>(id: number, timeoutMs = 120000, pollMs = 100): Promise<T> {
    const t0 = Date.now();
    for (;;) {
      const j = await this.job<T>(id);
      if (j.status === "done") return j.result as T;
      if (j.status === "error") throw new ApiError(500, j.error);
      if (Date.now() - t0 > timeoutMs) throw new ApiError(408, "job timeout");
      await new Promise((res) => setTimeout(res, pollMs));
    }
  }

  lockboxStatus(): Promise<LockboxStatus> {
    return this.request("GET", "/api/lockbox/status");
  }

  startCalibration(): Promise<JobTicket> {
    return this.request("POST", "/api/lockbox/calibrate");
  }

  startSequence(): Promise<JobTicket> {
    return this.request("POST", "/api/lockbox/sequence");
  }

  abort(): Promise<{ aborted: boolean }> {
    return this.request("POST", "/api/lockbox/abort");
  }

  events(since: number): Promise<{ events: LockEvent[] }> {
    return this.request("GET", `/api/events?since=${since}`);
  }
}
