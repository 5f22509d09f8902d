/** Browser wiring: canvases per channel strip, zoom/pan, click-to-annotate.
 *
 * Keyboard: o = ON, f = OFF (kind of the next placed marker),
 * [ / ] = previous / next day, +/- = zoom around center.
 */

import { ApiClient } from "./api.js";
import { buildStrip } from "./strips.js";
import { ViewState } from "./viewstate.js";
import type { EventKind } from "./types.js";

const STRIP_HEIGHT = 120;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  parent?: HTMLElement,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  parent?.appendChild(node);
  return node;
}

class Annotator {
  private readonly view: ViewState;
  private readonly canvases = new Map<string, HTMLCanvasElement>();
  private readonly banner: HTMLElement;
  private readonly status: HTMLElement;
  private readonly applianceInput: HTMLInputElement;

  constructor(
    private readonly root: HTMLElement,
    client: ApiClient,
    private readonly widthPx: number,
  ) {
    this.view = new ViewState(client, widthPx);
    this.banner = el("div", { class: "banner", style: "display:none" }, root);
    const bar = el("div", { class: "toolbar" }, root);
    this.status = el("span", { class: "status" }, bar);
    this.applianceInput = el("input", { placeholder: "appliance", value: "" }, bar);
    el("span", { class: "hint" }, bar).textContent =
      " o=ON f=OFF  [=prev day ]=next day  +/-=zoom  click strip to annotate, click marker to delete";
  }

  async start(): Promise<void> {
    try {
      await this.view.load();
    } catch {
      this.render();
      return;
    }
    for (const channel of this.view.selected) {
      const wrap = el("div", { class: "strip" }, this.root);
      el("label", {}, wrap).textContent = channel;
      const canvas = el(
        "canvas",
        { width: String(this.widthPx), height: String(STRIP_HEIGHT) },
        wrap,
      );
      canvas.addEventListener("click", (ev) => void this.onClick(channel, ev));
      canvas.addEventListener("wheel", (ev) => void this.onWheel(ev), { passive: false });
      this.canvases.set(channel, canvas);
    }
    document.addEventListener("keydown", (ev) => void this.onKey(ev));
    this.render();
  }

  private async onClick(channel: string, ev: MouseEvent): Promise<void> {
    const canvas = this.canvases.get(channel);
    if (!canvas) return;
    const x = ev.offsetX;
    const hit = this.view
      .markersFor(channel)
      .find((m) => Math.abs(this.view.scale.timeToPixel(m.time_s) - x) < 4);
    try {
      if (hit) {
        await this.view.deleteMarker(hit.id);
      } else {
        this.view.draftAt(channel, x, this.view.defaultKind, this.applianceInput.value);
        await this.view.saveDraft();
      }
    } catch {
      // errorBanner carries the reason; draft is retained for retry
    }
    this.render();
  }

  private async onWheel(ev: WheelEvent): Promise<void> {
    ev.preventDefault();
    const factor = ev.deltaY < 0 ? 1.5 : 1 / 1.5;
    await this.view.zoom(factor, ev.offsetX).catch(() => undefined);
    this.render();
  }

  private async onKey(ev: KeyboardEvent): Promise<void> {
    const kinds: Record<string, EventKind> = { o: "ON", f: "OFF" };
    const kind = kinds[ev.key];
    if (kind !== undefined) {
      this.view.defaultKind = kind;
    } else if (ev.key === "[") {
      await this.view.panDays(-1).catch(() => undefined);
    } else if (ev.key === "]") {
      await this.view.panDays(1).catch(() => undefined);
    } else if (ev.key === "+" || ev.key === "=") {
      await this.view.zoom(1.5, this.widthPx / 2).catch(() => undefined);
    } else if (ev.key === "-") {
      await this.view.zoom(1 / 1.5, this.widthPx / 2).catch(() => undefined);
    } else {
      return;
    }
    this.render();
  }

  private render(): void {
    this.banner.style.display = this.view.errorBanner ? "block" : "none";
    this.banner.textContent = this.view.errorBanner
      ? `service error: ${this.view.errorBanner}${this.view.stale ? " (showing stale data)" : ""}`
      : "";
    const { t0, t1 } = this.view.scale;
    this.status.textContent =
      `[${t0.toFixed(1)}s .. ${t1.toFixed(1)}s]  next marker: ${this.view.defaultKind}  `;
    for (const [channel, canvas] of this.canvases) {
      const tile = this.view.tiles.get(channel);
      const ctx = canvas.getContext("2d");
      if (!ctx || !tile) continue;
      const list = buildStrip(channel, tile, this.view.markersFor(channel), this.view.scale, {
        widthPx: canvas.width,
        heightPx: canvas.height,
      });
      ctx.clearRect(0, 0, canvas.width, canvas.height);
      ctx.strokeStyle = "#9ecbff";
      ctx.beginPath();
      for (const p of list.band) {
        ctx.moveTo(p.x, p.yMin);
        ctx.lineTo(p.x, p.yMax);
      }
      ctx.stroke();
      ctx.strokeStyle = "#1f6feb";
      ctx.beginPath();
      list.band.forEach((p, i) => (i === 0 ? ctx.moveTo(p.x, p.yMean) : ctx.lineTo(p.x, p.yMean)));
      ctx.stroke();
      for (const m of list.markers) {
        ctx.strokeStyle = m.kind === "ON" ? "#2da44e" : "#cf222e";
        ctx.beginPath();
        ctx.moveTo(m.x, 0);
        ctx.lineTo(m.x, canvas.height);
        ctx.stroke();
      }
    }
  }
}

export async function boot(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app container");
  const base = (window as unknown as { SERVICE_URL?: string }).SERVICE_URL ?? "";
  await new Annotator(root, new ApiClient(base), 1200).start();
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  void boot();
}
