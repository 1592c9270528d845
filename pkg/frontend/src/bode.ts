// Bode display data preparation: server payloads in, drawable series out.
//
// Conversions here are presentation only (complex -> dB/degrees, overlay
// combination of two server curves); no responses are synthesized
// client-side, and the underlying payload arrays are kept by reference so
// tests can assert the plotted filter curve IS the server's payload.

import { BodePayload } from "./api.js";

export interface Series {
  label: string;
  freqs: number[];
  magDb: number[];
  phaseDeg: number[];
  payload: BodePayload;     // the server payload backing this series
}

export function toSeries(label: string, payload: BodePayload): Series {
  const magDb: number[] = [];
  const phaseDeg: number[] = [];
  for (let i = 0; i < payload.freqs_hz.length; i++) {
    const re = payload.re[i];
    const im = payload.im[i];
    magDb.push(10 * Math.log10(re * re + im * im));
    phaseDeg.push((Math.atan2(im, re) * 180) / Math.PI);
  }
  return { label, freqs: payload.freqs_hz, magDb, phaseDeg, payload };
}

/**
 * The product overlay of plant and filter curves (the "flatness" check):
 * pointwise complex product of the two server payloads, interpolating the
 * filter onto the plant's frequency grid in the complex plane.
 */
export function productSeries(plant: Series, filter: Series): Series {
  const freqs = plant.freqs;
  const re: number[] = [];
  const im: number[] = [];
  for (let i = 0; i < freqs.length; i++) {
    const [fr, fi] = interpComplex(filter, freqs[i]);
    const pr = plant.payload.re[i];
    const pi = plant.payload.im[i];
    re.push(pr * fr - pi * fi);
    im.push(pr * fi + pi * fr);
  }
  const payload = { freqs_hz: freqs, re, im };
  const s = toSeries("product", payload);
  return s;
}

function interpComplex(s: Series, f: number): [number, number] {
  const fs = s.payload.freqs_hz;
  if (f <= fs[0]) return [s.payload.re[0], s.payload.im[0]];
  const n = fs.length - 1;
  if (f >= fs[n]) return [s.payload.re[n], s.payload.im[n]];
  let lo = 0;
  let hi = n;
  while (hi - lo > 1) {
    const mid = (lo + hi) >> 1;
    if (fs[mid] <= f) lo = mid;
    else hi = mid;
  }
  const t = (Math.log(f) - Math.log(fs[lo])) / (Math.log(fs[hi]) - Math.log(fs[lo]));
  return [
    s.payload.re[lo] + t * (s.payload.re[hi] - s.payload.re[lo]),
    s.payload.im[lo] + t * (s.payload.im[hi] - s.payload.im[lo]),
  ];
}

export interface CursorReading {
  freq_hz: number;
  magDb: number;
  phaseDeg: number;
}

export function cursorAt(s: Series, f: number): CursorReading {
  const fs = s.freqs;
  let best = 0;
  let dist = Infinity;
  for (let i = 0; i < fs.length; i++) {
    const d = Math.abs(Math.log(fs[i] || 1e-12) - Math.log(f));
    if (d < dist) {
      dist = d;
      best = i;
    }
  }
  return { freq_hz: fs[best], magDb: s.magDb[best], phaseDeg: s.phaseDeg[best] };
}
