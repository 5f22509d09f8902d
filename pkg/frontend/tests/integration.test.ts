/** Round-trip against the real Python service on a synthetic dataset.
 *
 * Covers the release criterion: a marker placed at a known synthetic event
 * time through the UI layer shows up in the CSV export with the exact time,
 * and a freshly loaded view (a reload) still shows it.
 */

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { TimeScale } from "../src/timescale.js";
import { ViewState } from "../src/viewstate.js";

const PYTHON = process.env.PYTHON ?? "python3";
const pythonAvailable = spawnSync(PYTHON, ["-c", "import nilmevents"]).status === 0;

const suite = pythonAvailable ? describe : describe.skip;

suite("against the live annotation service", () => {
  let workDir: string;
  let server: ChildProcess;
  let client: ApiClient;
  let eventTime: number;
  let channelId: string;
  const port = 21000 + Math.floor(Math.random() * 10000);

  beforeAll(async () => {
    workDir = mkdtempSync(join(tmpdir(), "nilmevents-ui-"));
    const synth = spawnSync(PYTHON, [
      "-m", "nilmevents.cli", "synth",
      "--duration", "240", "--events", "5", "--nuisance", "8",
      "--seed", "23", "--fs", "500", "--f0", "50",
      "--out", workDir, "--name", "ds",
    ]);
    expect(synth.status).toBe(0);
    const gt = readFileSync(join(workDir, "ds.gt.csv"), "utf-8").trim().split("\n");
    const firstRow = gt[1]!.split(",");
    eventTime = Number(firstRow[0]);
    channelId = firstRow[1]!;

    server = spawn(PYTHON, [
      "-m", "nilmevents.cli", "serve",
      "--data", workDir, "--store", join(workDir, "ann.jsonl"),
      "--port", String(port),
    ], { stdio: "ignore" });
    client = new ApiClient(`http://127.0.0.1:${port}`);
    const deadline = Date.now() + 20000;
    for (;;) {
      try {
        await client.health();
        break;
      } catch {
        if (Date.now() > deadline) throw new Error("service did not come up");
        await new Promise((r) => setTimeout(r, 250));
      }
    }
  }, 30000);

  afterAll(() => {
    server?.kill();
    rmSync(workDir, { recursive: true, force: true });
  });

  it("health and channel discovery", async () => {
    expect((await client.health()).status).toBe("ok");
    const channels = await client.channels();
    expect(channels.map((c) => c.channel_id)).toContain(channelId);
  });

  it("zooming in refetches a finer tile", async () => {
    const view = new ViewState(client, 1200);
    await view.load();
    const coarse = view.tiles.get(channelId)!;
    await view.setScale(new TimeScale(eventTime - 30, eventTime + 30, 1200));
    const fine = view.tiles.get(channelId)!;
    expect(fine.dt_s).toBeLessThan(coarse.dt_s);
    for (const [lo, hi, mean] of fine.points) {
      expect(lo).toBeLessThanOrEqual(mean);
      expect(mean).toBeLessThanOrEqual(hi);
    }
  });

  it("annotation round-trip: click -> export -> reload", async () => {
    const view = new ViewState(client, 1200);
    await view.load();
    // zoom close around the known event so a pixel is far finer than a bucket
    await view.setScale(new TimeScale(eventTime - 10, eventTime + 10, 1200));
    const clickX = view.scale.timeToPixel(eventTime);
    const draft = view.draftAt(channelId, clickX, "ON", "kettle");
    const tile = view.tiles.get(channelId)!;
    expect(Math.abs(draft.time_s - eventTime)).toBeLessThanOrEqual(tile.dt_s);

    const saved = await view.saveDraft();
    expect(saved.revision).toBe(1);

    // the stored and exported time is bit-exact, no display quantization
    const csv = await client.exportCsv();
    const row = csv.trim().split("\n").find((line) => line.includes("kettle"));
    expect(row).toBeDefined();
    expect(Number(row!.split(",")[0])).toBe(draft.time_s);

    // reload: a brand-new view sees the marker at the same exact time
    const reloaded = new ViewState(client, 1200);
    await reloaded.load();
    const markers = reloaded.markersFor(channelId);
    expect(markers.some((m) => m.id === saved.id && m.time_s === draft.time_s)).toBe(true);
  });

  it("delete removes the marker from the export", async () => {
    const view = new ViewState(client, 1200);
    await view.load();
    view.draftAt(channelId, 100, "OFF", "doomed");
    const saved = await view.saveDraft();
    await view.deleteMarker(saved.id);
    const csv = await client.exportCsv();
    expect(csv.includes("doomed")).toBe(false);
  });

  it("stale revision is rejected with a conflict", async () => {
    const record = await client.putAnnotation({
      time_s: 12.5, channel_id: channelId, appliance: "fan", kind: "ON", annotator: "t",
    });
    await client.putAnnotation(
      { time_s: 13.0, channel_id: channelId, appliance: "fan", kind: "OFF", annotator: "t" },
      { id: record.id, revision: record.revision },
    );
    await expect(
      client.putAnnotation(
        { time_s: 14.0, channel_id: channelId, appliance: "fan", kind: "ON", annotator: "t" },
        { id: record.id, revision: record.revision },
      ),
    ).rejects.toThrowError(ApiError);
  });
}, 60000);
