/** Minimal canvas line charts for telemetry series. */

import { RingBuffer } from "./ring.js";

export function drawSeries(canvas: HTMLCanvasElement, ring: RingBuffer, label: string): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const w = canvas.width;
  const h = canvas.height;
  ctx.clearRect(0, 0, w, h);
  ctx.fillStyle = "#10151c";
  ctx.fillRect(0, 0, w, h);

  const points = ring.toArray();
  const stats = ring.stats();
  if (points.length >= 2) {
    const t0 = points[0].t;
    const t1 = points[points.length - 1].t;
    const tSpan = Math.max(t1 - t0, 1e-9);
    const lo = stats.min;
    const span = Math.max(stats.max - lo, 1e-9);
    ctx.strokeStyle = "#53b1fd";
    ctx.lineWidth = 1.25;
    ctx.beginPath();
    for (let i = 0; i < points.length; i++) {
      const x = ((points[i].t - t0) / tSpan) * (w - 8) + 4;
      const y = h - 14 - ((points[i].value - lo) / span) * (h - 22);
      if (i === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    }
    ctx.stroke();
  }
  ctx.fillStyle = "#9fb3c8";
  ctx.font = "10px monospace";
  const readout = Number.isNaN(stats.mean)
    ? "no data"
    : `min ${stats.min.toFixed(2)}  mean ${stats.mean.toFixed(2)}  max ${stats.max.toFixed(2)}`;
  ctx.fillText(`${label}  ${readout}`, 4, h - 3);
}
