/** End-to-end: spin up the real service on synthetic data and drive it
 * through the same client + renderer the page uses. */

import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { type ChildProcess, spawn, spawnSync } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { fileURLToPath } from "node:url";

import { ServiceClient } from "../src/api.js";
import { countResultRows, renderResults } from "../src/render.js";

const PORT = 8731;
const BASE = `http://127.0.0.1:${PORT}`;

let serverProc: ChildProcess | null = null;
let fixtureDir: string;
const client = new ServiceClient(BASE);

async function waitForHealth(timeoutMs: number): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  let lastError: unknown = null;
  while (Date.now() < deadline) {
    try {
      const info = await client.health();
      if (info.status === "ok") return;
    } catch (err) {
      lastError = err;
    }
    await new Promise((resolve) => setTimeout(resolve, 500));
  }
  throw new Error(`service never became healthy: ${String(lastError)}`);
}

beforeAll(async () => {
  fixtureDir = mkdtempSync(join(tmpdir(), "viml-e2e-"));
  const fixtureScript = fileURLToPath(new URL("./fixture.py", import.meta.url));
  const build = spawnSync("python3", [fixtureScript, fixtureDir], {
    encoding: "utf-8",
    timeout: 150_000,
  });
  if (build.status !== 0) {
    throw new Error(`fixture build failed:\n${build.stdout}\n${build.stderr}`);
  }
  serverProc = spawn(
    "python3",
    [
      "-m",
      "viml.cli",
      "serve",
      "--ckpt",
      join(fixtureDir, "ckpt"),
      "--store",
      join(fixtureDir, "store"),
      "--port",
      String(PORT),
    ],
    { stdio: "ignore" },
  );
  await waitForHealth(60_000);
});

afterAll(() => {
  serverProc?.kill();
  if (fixtureDir) rmSync(fixtureDir, { recursive: true, force: true });
});

describe("frontend against the live service", () => {
  it("renders exactly top_k rows in the service's order", async () => {
    const videos = await client.videos();
    expect(videos.length).toBeGreaterThan(0);
    const topK = 7;
    const results = await client.query({
      video_id: videos[0],
      text: "any text",
      top_k: topK,
    });
    expect(results).toHaveLength(topK);
    const html = renderResults(results);
    expect(countResultRows(html)).toBe(topK);
    const rendered = [...html.matchAll(/class="track">([^<]+)</g)].map((m) => m[1]);
    expect(rendered).toEqual(results.map((r) => r.track_id));
  });

  it("accepts an empty text submission (video-only retrieval)", async () => {
    const videos = await client.videos();
    const results = await client.query({
      video_id: videos[1],
      text: "",
      top_k: 5,
    });
    expect(results).toHaveLength(5);
    expect(countResultRows(renderResults(results))).toBe(5);
  });

  it("returns identical rendered lists for identical inputs", async () => {
    const videos = await client.videos();
    const req = { video_id: videos[2], text: "mellow jazz with saxophone", top_k: 6 };
    const first = renderResults(await client.query(req));
    const second = renderResults(await client.query(req));
    expect(second).toBe(first);
  });

  it("keeps scores within the cosine range", async () => {
    const videos = await client.videos();
    const results = await client.query({ video_id: videos[0], text: "", top_k: 10 });
    for (const r of results) {
      expect(r.score).toBeGreaterThanOrEqual(-1.000001);
      expect(r.score).toBeLessThanOrEqual(1.000001);
    }
  });
});
