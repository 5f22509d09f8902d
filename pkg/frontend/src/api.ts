/** Typed client for the annotation service; the UI's only write path. */

import type { AnnotationDraft, AnnotationRecord, ChannelInfo, SeriesTile } from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function parseError(response: Response): Promise<never> {
  let detail = response.statusText;
  try {
    const body = (await response.json()) as { detail?: string };
    if (body.detail) detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(response.status, detail);
}

export class ApiClient {
  constructor(readonly baseUrl: string) {}

  private async getJson<T>(path: string): Promise<T> {
    const response = await fetch(this.baseUrl + path);
    if (!response.ok) await parseError(response);
    return (await response.json()) as T;
  }

  health(): Promise<{ status: string }> {
    return this.getJson("/health");
  }

  channels(): Promise<ChannelInfo[]> {
    return this.getJson("/channels");
  }

  series(channel: string, startS: number, endS: number, maxPoints: number): Promise<SeriesTile> {
    const query = new URLSearchParams({
      channel,
      start: String(startS),
      end: String(endS),
      max_points: String(maxPoints),
    });
    return this.getJson(`/series?${query}`);
  }

  async listAnnotations(channel?: string): Promise<AnnotationRecord[]> {
    const query = channel ? `?${new URLSearchParams({ channel })}` : "";
    const body = await this.getJson<{ annotations: AnnotationRecord[] }>(`/annotations${query}`);
    return body.annotations;
  }

  async putAnnotation(
    draft: AnnotationDraft,
    existing?: { id: number; revision: number },
  ): Promise<AnnotationRecord> {
    const response = await fetch(`${this.baseUrl}/annotations`, {
      method: "PUT",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(existing ? { ...draft, ...existing } : draft),
    });
    if (!response.ok) await parseError(response);
    return (await response.json()) as AnnotationRecord;
  }

  async deleteAnnotation(id: number): Promise<void> {
    const response = await fetch(`${this.baseUrl}/annotations?id=${id}`, { method: "DELETE" });
    if (!response.ok) await parseError(response);
  }

  async exportCsv(): Promise<string> {
    const response = await fetch(`${this.baseUrl}/export.csv`);
    if (!response.ok) await parseError(response);
    return response.text();
  }
}
