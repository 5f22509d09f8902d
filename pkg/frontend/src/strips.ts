/** Pure draw-list construction: tile + markers -> primitives for a canvas strip. */

import { TimeScale } from "./timescale.js";
import type { AnnotationRecord, SeriesTile } from "./types.js";

export interface StripGeometry {
  widthPx: number;
  heightPx: number;
}

export interface BandPoint {
  x: number;
  yMin: number;
  yMax: number;
  yMean: number;
}

export interface MarkerGlyph {
  x: number;
  kind: "ON" | "OFF";
  id: number;
  timeS: number;
}

export interface StripDrawList {
  channelId: string;
  band: BandPoint[];
  markers: MarkerGlyph[];
  wattsTop: number;
  wattsBottom: number;
}

/** Map a tile onto strip pixels; y is screen-down (0 = top of the strip). */
export function buildStrip(
  channelId: string,
  tile: SeriesTile,
  markers: AnnotationRecord[],
  scale: TimeScale,
  geometry: StripGeometry,
): StripDrawList {
  const visible = tile.points.filter((_, i) => {
    const t = tile.t0_s + (i + 0.5) * tile.dt_s;
    return t >= scale.t0 && t <= scale.t1;
  });
  let lo = Infinity;
  let hi = -Infinity;
  for (const [pMin, pMax] of visible) {
    lo = Math.min(lo, pMin);
    hi = Math.max(hi, pMax);
  }
  if (!Number.isFinite(lo)) {
    lo = 0;
    hi = 1;
  }
  if (hi - lo < 1e-9) hi = lo + 1;
  const pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  const yOf = (watts: number): number => ((hi - watts) / (hi - lo)) * geometry.heightPx;

  const band: BandPoint[] = [];
  tile.points.forEach(([pMin, pMax, pMean], i) => {
    const t = tile.t0_s + (i + 0.5) * tile.dt_s;
    if (t < scale.t0 || t > scale.t1) return;
    band.push({
      x: scale.timeToPixel(t),
      yMin: yOf(pMin),
      yMax: yOf(pMax),
      yMean: yOf(pMean),
    });
  });

  const glyphs: MarkerGlyph[] = markers
    .filter((m) => m.time_s >= scale.t0 && m.time_s <= scale.t1)
    .map((m) => ({ x: scale.timeToPixel(m.time_s), kind: m.kind, id: m.id, timeS: m.time_s }));

  return { channelId, band, markers: glyphs, wattsTop: hi, wattsBottom: lo };
}
