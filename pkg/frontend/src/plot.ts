// Minimal canvas line plot: log-x axis, multiple series, mouse cursor.

export interface PlotSeries {
  label: string;
  x: number[];
  y: number[];
  color: string;
}

export class LinePlot {
  private ctx: CanvasRenderingContext2D;
  private series: PlotSeries[] = [];
  private logX: boolean;
  onCursor: ((x: number) => void) | null = null;

  constructor(private canvas: HTMLCanvasElement, opts: { logX?: boolean } = {}) {
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("no 2d context");
    this.ctx = ctx;
    this.logX = opts.logX ?? false;
    canvas.addEventListener("mousemove", (ev) => {
      if (!this.onCursor || this.series.length === 0) return;
      const rect = canvas.getBoundingClientRect();
      const fx = (ev.clientX - rect.left) / rect.width;
      const [x0, x1] = this.xRange();
      const x = this.logX
        ? Math.exp(Math.log(x0) + fx * (Math.log(x1) - Math.log(x0)))
        : x0 + fx * (x1 - x0);
      this.onCursor(x);
    });
  }

  setSeries(series: PlotSeries[]): void {
    this.series = series.filter((s) => s.x.length > 0);
    this.draw();
  }

  private xRange(): [number, number] {
    let lo = Infinity;
    let hi = -Infinity;
    for (const s of this.series) {
      lo = Math.min(lo, s.x[0]);
      hi = Math.max(hi, s.x[s.x.length - 1]);
    }
    return [lo, hi];
  }

  private yRange(): [number, number] {
    let lo = Infinity;
    let hi = -Infinity;
    for (const s of this.series) {
      for (const v of s.y) {
        if (Number.isFinite(v)) {
          lo = Math.min(lo, v);
          hi = Math.max(hi, v);
        }
      }
    }
    if (!Number.isFinite(lo)) return [0, 1];
    const pad = 0.05 * (hi - lo || 1);
    return [lo - pad, hi + pad];
  }

  draw(): void {
    const { width: w, height: h } = this.canvas;
    const ctx = this.ctx;
    ctx.clearRect(0, 0, w, h);
    ctx.fillStyle = "#111";
    ctx.fillRect(0, 0, w, h);
    if (this.series.length === 0) {
      ctx.fillStyle = "#777";
      ctx.fillText("no data", w / 2 - 20, h / 2);
      return;
    }
    const [x0, x1] = this.xRange();
    const [y0, y1] = this.yRange();
    const px = (x: number) =>
      this.logX
        ? ((Math.log(x) - Math.log(x0)) / (Math.log(x1) - Math.log(x0))) * w
        : ((x - x0) / (x1 - x0)) * w;
    const py = (y: number) => h - ((y - y0) / (y1 - y0)) * h;
    ctx.strokeStyle = "#333";
    ctx.beginPath();
    for (let g = 1; g < 5; g++) {
      ctx.moveTo(0, (g * h) / 5);
      ctx.lineTo(w, (g * h) / 5);
    }
    ctx.stroke();
    for (const s of this.series) {
      ctx.strokeStyle = s.color;
      ctx.beginPath();
      for (let i = 0; i < s.x.length; i++) {
        const X = px(s.x[i]);
        const Y = py(s.y[i]);
        if (i === 0) ctx.moveTo(X, Y);
        else ctx.lineTo(X, Y);
      }
      ctx.stroke();
    }
    ctx.fillStyle = "#ccc";
    ctx.font = "11px monospace";
    this.series.forEach((s, i) => {
      ctx.fillStyle = s.color;
      ctx.fillText(s.label, 8, 14 + 13 * i);
    });
  }
}
