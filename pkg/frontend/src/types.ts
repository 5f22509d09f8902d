/** Wire types of the annotation service (all times are float seconds from recording start). */

export interface ChannelInfo {
  channel_id: string;
  fs: number;
  F0: number;
  duration_s: number;
  start_time: number;
}

/** Downsampled power series: one [min, max, mean] triplet per bucket of dt_s seconds. */
export interface SeriesTile {
  channel_id: string;
  t0_s: number;
  dt_s: number;
  points: [number, number, number][];
}

export type EventKind = "ON" | "OFF";

export interface AnnotationRecord {
  id: number;
  time_s: number;
  channel_id: string;
  appliance: string;
  kind: EventKind;
  annotator: string;
  created_at: number;
  revision: number;
  deleted: boolean;
}

export interface AnnotationDraft {
  time_s: number;
  channel_id: string;
  appliance: string;
  kind: EventKind;
  annotator: string;
}
