/** UI state machine: visible channels, zoom range, tiles, markers, drafts.
 *
 * Every mutation of persisted data goes through the service client; the view
 * only caches what the service returned, so an export is always the truth.
 */

import { ApiError } from "./api.js";
import { TimeScale } from "./timescale.js";
import type {
  AnnotationDraft,
  AnnotationRecord,
  ChannelInfo,
  EventKind,
  SeriesTile,
} from "./types.js";

export const MAX_STRIPS = 6;
export const DEFAULT_MAX_POINTS = 2000;

/** Refetch once the tile is coarser than twice the resolution the view needs. */
export function needsRefetch(tile: SeriesTile | undefined, scale: TimeScale): boolean {
  if (!tile) return true;
  const tileEnd = tile.t0_s + tile.points.length * tile.dt_s;
  if (tile.t0_s > scale.t0 + 1e-9 || tileEnd < scale.t1 - 1e-9) return true;
  return tile.dt_s > 2 * scale.secondsPerPixel;
}

export interface ServiceClient {
  channels(): Promise<ChannelInfo[]>;
  series(channel: string, startS: number, endS: number, maxPoints: number): Promise<SeriesTile>;
  listAnnotations(channel?: string): Promise<AnnotationRecord[]>;
  putAnnotation(
    draft: AnnotationDraft,
    existing?: { id: number; revision: number },
  ): Promise<AnnotationRecord>;
  deleteAnnotation(id: number): Promise<void>;
}

export class ViewState {
  channels: ChannelInfo[] = [];
  selected: string[] = [];
  scale: TimeScale;
  tiles = new Map<string, SeriesTile>();
  markers: AnnotationRecord[] = [];
  draft: AnnotationDraft | null = null;
  /** Set when the service was unreachable; rendered data may be stale. */
  errorBanner: string | null = null;
  stale = false;
  annotator = "annotator";
  defaultKind: EventKind = "ON";
  maxPoints = DEFAULT_MAX_POINTS;

  constructor(
    private readonly client: ServiceClient,
    widthPx = 1200,
  ) {
    this.scale = new TimeScale(0, 86400, widthPx);
  }

  get durationS(): number {
    return Math.max(...this.channels.map((c) => c.duration_s), 0);
  }

  async load(): Promise<void> {
    try {
      this.channels = await this.client.channels();
      this.selectChannels(this.channels.slice(0, MAX_STRIPS).map((c) => c.channel_id));
      const span = Math.min(86400, this.durationS);
      this.scale = new TimeScale(0, span, this.scale.widthPx);
      await this.refreshMarkers();
      await this.refreshTiles();
      this.errorBanner = null;
      this.stale = false;
    } catch (err) {
      this.flagUnreachable(err);
      throw err;
    }
  }

  selectChannels(ids: string[]): void {
    if (ids.length > MAX_STRIPS) {
      throw new RangeError(`at most ${MAX_STRIPS} channels can be shown, got ${ids.length}`);
    }
    const known = new Set(this.channels.map((c) => c.channel_id));
    for (const id of ids) {
      if (!known.has(id)) throw new RangeError(`unknown channel ${id}`);
    }
    this.selected = [...ids];
    if (this.draft && !this.selected.includes(this.draft.channel_id)) this.draft = null;
  }

  async refreshMarkers(): Promise<void> {
    try {
      this.markers = await this.client.listAnnotations();
      this.stale = false;
      this.errorBanner = null;
    } catch (err) {
      this.flagUnreachable(err);
      throw err;
    }
  }

  /** Fetch tiles for every selected channel whose cache is missing or too coarse. */
  async refreshTiles(): Promise<void> {
    for (const channel of this.selected) {
      if (!needsRefetch(this.tiles.get(channel), this.scale)) continue;
      try {
        const info = this.channels.find((c) => c.channel_id === channel);
        const end = Math.min(this.scale.t1, info ? info.duration_s : this.scale.t1);
        const start = Math.max(0, Math.min(this.scale.t0, end - 1e-6));
        const tile = await this.client.series(channel, start, end, this.maxPoints);
        this.tiles.set(channel, tile);
        this.stale = false;
        this.errorBanner = null;
      } catch (err) {
        this.flagUnreachable(err);
        throw err;
      }
    }
  }

  async setScale(scale: TimeScale): Promise<void> {
    this.scale = scale.clamp(0, Math.max(this.durationS, scale.spanS));
    await this.refreshTiles();
  }

  async zoom(factor: number, anchorPx: number): Promise<void> {
    await this.setScale(this.scale.zoom(factor, anchorPx));
  }

  async panDays(days: number): Promise<void> {
    await this.setScale(this.scale.pan((days * 86400) / this.scale.secondsPerPixel));
  }

  markersFor(channel: string): AnnotationRecord[] {
    return this.markers.filter(
      (m) => m.channel_id === channel && m.time_s >= this.scale.t0 && m.time_s <= this.scale.t1,
    );
  }

  /** Start a draft from a click: pixel -> time at the current zoom. */
  draftAt(channel: string, xPx: number, kind: EventKind, appliance: string): AnnotationDraft {
    if (!this.selected.includes(channel)) {
      throw new RangeError(`channel ${channel} is not visible`);
    }
    this.draft = {
      time_s: this.scale.pixelToTime(xPx),
      channel_id: channel,
      appliance,
      kind,
      annotator: this.annotator,
    };
    return this.draft;
  }

  /** Optimistically add the draft marker; roll back and keep the draft on rejection. */
  async saveDraft(): Promise<AnnotationRecord> {
    if (!this.draft) throw new Error("no pending draft");
    const draft = this.draft;
    const optimistic: AnnotationRecord = {
      id: -1,
      ...draft,
      created_at: 0,
      revision: 0,
      deleted: false,
    };
    this.markers = [...this.markers, optimistic];
    try {
      const saved = await this.client.putAnnotation(draft);
      this.markers = this.markers.map((m) => (m === optimistic ? saved : m));
      this.draft = null;
      return saved;
    } catch (err) {
      this.markers = this.markers.filter((m) => m !== optimistic);
      if (err instanceof ApiError) {
        this.errorBanner = err.detail; // draft stays for retry
      } else {
        this.flagUnreachable(err);
      }
      throw err;
    }
  }

  async deleteMarker(id: number): Promise<void> {
    const kept = this.markers.filter((m) => m.id !== id);
    const removed = this.markers.length !== kept.length;
    this.markers = kept;
    try {
      await this.client.deleteAnnotation(id);
    } catch (err) {
      if (removed) await this.refreshMarkers().catch(() => undefined);
      if (err instanceof ApiError) this.errorBanner = err.detail;
      else this.flagUnreachable(err);
      throw err;
    }
  }

  private flagUnreachable(err: unknown): void {
    this.errorBanner = err instanceof Error ? err.message : String(err);
    this.stale = true;
  }
}
