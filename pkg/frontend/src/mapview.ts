// Canvas rendering of the basemap, flags and markers, plus hit testing.

import { fromScreen, PlaneProjection, toScreen, Viewport } from "./geo.js";
import { flagColor } from "./model.js";
import { BridgeRecord, DefectRecord, GeoPoint } from "./types.js";

const FLAG_HIT_RADIUS = 14;
const MARKER_HIT_RADIUS = 10;

export class MapView {
  constructor(
    private readonly canvas: HTMLCanvasElement,
    private readonly proj: PlaneProjection,
  ) {}

  render(view: Viewport, bridges: BridgeRecord[], defects: DefectRecord[], showMarkers: boolean) {
    const ctx = this.canvas.getContext("2d")!;
    const { width, height } = this.canvas;
    ctx.fillStyle = "#10151c";
    ctx.fillRect(0, 0, width, height);
    this.drawGraticule(ctx, view, width, height);
    if (showMarkers) {
      for (const d of defects) this.drawMarker(ctx, view, width, height, d);
    }
    for (const b of bridges) this.drawFlag(ctx, view, width, height, b);
  }

  private drawGraticule(
    ctx: CanvasRenderingContext2D,
    view: Viewport,
    width: number,
    height: number,
  ) {
    // grid lines every decimal degree step close to a fifth of the span
    const degPerM = 1 / 111320;
    const target = view.spanM * degPerM * 0.2;
    const step = Math.pow(10, Math.round(Math.log10(Math.max(target, 1e-6))));
    ctx.strokeStyle = "#263241";
    ctx.fillStyle = "#51626f";
    ctx.font = "10px sans-serif";
    ctx.lineWidth = 1;
    const corner0 = fromScreen(this.proj, view, width, height, 0, height);
    const corner1 = fromScreen(this.proj, view, width, height, width, 0);
    for (let lat = Math.ceil(corner0.lat / step) * step; lat <= corner1.lat; lat += step) {
      const y = toScreen(this.proj, view, width, height, { lat, lon: view.center.lon }).y;
      ctx.beginPath();
      ctx.moveTo(0, y);
      ctx.lineTo(width, y);
      ctx.stroke();
      ctx.fillText(lat.toFixed(4), 4, y - 3);
    }
    for (let lon = Math.ceil(corner0.lon / step) * step; lon <= corner1.lon; lon += step) {
      const x = toScreen(this.proj, view, width, height, { lat: view.center.lat, lon }).x;
      ctx.beginPath();
      ctx.moveTo(x, 0);
      ctx.lineTo(x, height);
      ctx.stroke();
      ctx.fillText(lon.toFixed(4), x + 3, height - 5);
    }
  }

  private drawFlag(
    ctx: CanvasRenderingContext2D,
    view: Viewport,
    width: number,
    height: number,
    bridge: BridgeRecord,
  ) {
    const p = toScreen(this.proj, view, width, height, bridge);
    ctx.strokeStyle = "#d8dee5";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(p.x, p.y);
    ctx.lineTo(p.x, p.y - 18);
    ctx.stroke();
    ctx.fillStyle = flagColor(bridge.condition);
    ctx.beginPath();
    ctx.moveTo(p.x, p.y - 18);
    ctx.lineTo(p.x + 14, p.y - 13);
    ctx.lineTo(p.x, p.y - 8);
    ctx.closePath();
    ctx.fill();
    ctx.fillStyle = "#d8dee5";
    ctx.font = "11px sans-serif";
    ctx.fillText(bridge.name, p.x + 8, p.y + 10);
  }

  private drawMarker(
    ctx: CanvasRenderingContext2D,
    view: Viewport,
    width: number,
    height: number,
    defect: DefectRecord,
  ) {
    const p = toScreen(this.proj, view, width, height, defect);
    ctx.strokeStyle = "#ff5f4f";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.arc(p.x, p.y, 6, 0, 2 * Math.PI);
    ctx.stroke();
    ctx.beginPath();
    ctx.moveTo(p.x - 3, p.y);
    ctx.lineTo(p.x + 3, p.y);
    ctx.moveTo(p.x, p.y - 3);
    ctx.lineTo(p.x, p.y + 3);
    ctx.stroke();
  }

  hitBridge(view: Viewport, bridges: BridgeRecord[], x: number, y: number): BridgeRecord | null {
    return this.hit(view, bridges, x, y, FLAG_HIT_RADIUS);
  }

  hitDefect(view: Viewport, defects: DefectRecord[], x: number, y: number): DefectRecord | null {
    return this.hit(view, defects, x, y, MARKER_HIT_RADIUS);
  }

  private hit<T extends GeoPoint>(
    view: Viewport,
    items: T[],
    x: number,
    y: number,
    radius: number,
  ): T | null {
    const { width, height } = this.canvas;
    let best: T | null = null;
    let bestDist = radius;
    for (const item of items) {
      const p = toScreen(this.proj, view, width, height, item);
      const dist = Math.hypot(p.x - x, p.y - y - 13); // flags are drawn above the point
      const plain = Math.hypot(p.x - x, p.y - y);
      const d = Math.min(dist, plain);
      if (d <= bestDist) {
        bestDist = d;
        best = item;
      }
    }
    return best;
  }

  screenToGeo(view: Viewport, x: number, y: number): GeoPoint {
    return fromScreen(this.proj, view, this.canvas.width, this.canvas.height, x, y);
  }
}
