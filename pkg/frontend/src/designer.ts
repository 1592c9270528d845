// Interactive pole/zero designer state.
//
// The canvas shows markers on the magnitude curve plus an edit table;
// complex entries always carry their conjugate partner, mirroring what
// the server's design pipeline enforces.  Every submitted edit round
// trips through the design endpoint before it lands in the accepted
// state, and the rendered filter curve is exactly the server's Bode
// payload (kept by reference, never recomputed).

import { ApiClient, ApiError, BodePayload, DesignResponse, PoleZeroItem } from "./api.js";

export type ItemKind = "pole" | "zero";

export interface DesignerItem {
  id: number;
  kind: ItemKind;
  freq_hz: number;     // >= 0; > 0 implies a conjugate pair
  gamma_hz: number;
  conjugate: boolean;  // display row for the mirrored partner
}

export interface DesignerOverlays {
  filter: BodePayload | null;       // the server payload, by reference
  plant: BodePayload | null;        // stored sweep, also a server payload
}

export class DesignerState {
  items: DesignerItem[] = [];
  dcGain = 1.0;
  selected: number | null = null;
  overlays: DesignerOverlays = { filter: null, plant: null };
  lastResponse: DesignResponse | null = null;
  lastError: string | null = null;
  busy = false;
  private nextId = 1;
  private queued = false;

  constructor(private api: ApiClient, private loadIntoEngine = false) {}

  /** Add an entry; a nonzero frequency automatically adds the conjugate row. */
  add(kind: ItemKind, freqHz: number, gammaHz: number): DesignerItem {
    const item: DesignerItem = {
      id: this.nextId++,
      kind,
      freq_hz: Math.abs(freqHz),
      gamma_hz: gammaHz,
      conjugate: false,
    };
    this.items.push(item);
    if (item.freq_hz > 0) {
      this.items.push({ ...item, id: this.nextId++, conjugate: true });
    }
    return item;
  }

  /** Remove an entry and its conjugate partner. */
  remove(id: number): void {
    const it = this.items.find((x) => x.id === id);
    if (!it) return;
    this.items = this.items.filter(
      (x) => !(x.kind === it.kind && x.freq_hz === it.freq_hz &&
               x.gamma_hz === it.gamma_hz),
    );
  }

  /** Drag an entry (and its partner) to a new position. */
  move(id: number, freqHz: number, gammaHz: number): void {
    const it = this.items.find((x) => x.id === id);
    if (!it) return;
    const partner = this.items.find(
      (x) => x.id !== id && x.kind === it.kind && x.freq_hz === it.freq_hz &&
             x.gamma_hz === it.gamma_hz && x.conjugate !== it.conjugate,
    );
    it.freq_hz = Math.abs(freqHz);
    it.gamma_hz = gammaHz;
    if (partner) {
      partner.freq_hz = it.freq_hz;
      partner.gamma_hz = it.gamma_hz;
    }
  }

  /** Primary (non-conjugate) rows, as the design request items. */
  requestItems(kind: ItemKind): PoleZeroItem[] {
    return this.items
      .filter((x) => x.kind === kind && !x.conjugate)
      .map((x) => ({ freq_hz: x.freq_hz, gamma_hz: x.gamma_hz }));
  }

  /**
   * Round trip the current canvas through the server.  At most one
   * submission is in flight; edits made meanwhile queue a re-submit.
   */
  async submit(): Promise<DesignResponse | null> {
    if (this.busy) {
      this.queued = true;
      return null;
    }
    this.busy = true;
    try {
      const resp = await this.api.design({
        zeros: this.requestItems("zero"),
        poles: this.requestItems("pole"),
        dc_gain: this.dcGain,
        auto_conjugate: true,
        load: this.loadIntoEngine,
      });
      this.lastResponse = resp;
      this.overlays.filter = resp.bode;    // by reference: server bytes
      this.lastError = null;
      return resp;
    } catch (err) {
      if (err instanceof ApiError) {
        this.lastError = String(err.message);
        return null;
      }
      throw err;
    } finally {
      this.busy = false;
      if (this.queued) {
        this.queued = false;
        await this.submit();
      }
    }
  }

  setPlantOverlay(sweep: BodePayload): void {
    this.overlays.plant = sweep;           // by reference: server bytes
  }
}
