/** Live round-trip against the Python scoring service.
 *
 * Generates a 16-image corpus with an empty ballot log, starts
 * `ruralhq serve` as a child process, and drives the same state machine the
 * browser uses: 15 images scored by one scripted session, tallies verified
 * image by image, then the {5,5,6,6} histogram on the leftover image.
 */

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync, unlinkSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { createApiClient } from "../src/api";
import { renderHistogram } from "../src/histogram";
import { ScoringSession } from "../src/state";
import type { Score } from "../src/types";

const PORT = 8931;
const BASE = `http://127.0.0.1:${PORT}`;
const PYTHON = process.env.PYTHON ?? "python3";

let server: ChildProcess | null = null;
let dataDir = "";

async function waitForServer(timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    try {
      const resp = await fetch(`${BASE}/api/next?rater=probe`);
      if (resp.ok) {
        return;
      }
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) {
      throw new Error("service did not come up in time");
    }
    await new Promise((resolve) => setTimeout(resolve, 200));
  }
}

beforeAll(async () => {
  dataDir = mkdtempSync(join(tmpdir(), "scoring-e2e-"));
  const synth = spawnSync(
    PYTHON,
    [
      "-m", "ruralhq.cli", "synth",
      "--seed", "3", "--n", "16", "--raters", "1", "--side", "16",
      "--out", dataDir, "--counties", "4",
    ],
    { encoding: "utf-8" },
  );
  if (synth.status !== 0) {
    throw new Error(`synth failed: ${synth.stderr}`);
  }
  unlinkSync(join(dataDir, "ballots.jsonl")); // start with an empty crowd

  server = spawn(
    PYTHON,
    ["-m", "ruralhq.cli", "serve", "--data-dir", dataDir, "--addr", `127.0.0.1:${PORT}`],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  await waitForServer();
}, 60_000);

afterAll(() => {
  server?.kill();
  if (dataDir) {
    rmSync(dataDir, { recursive: true, force: true });
  }
});

describe("scripted browser session against the live service", () => {
  const api = createApiClient(BASE);

  it("scores 15 images; server tallies match the script exactly", async () => {
    const session = new ScoringSession(api, "scripted-rater");
    const cast = new Map<string, Score>();

    await session.loadNext();
    for (let i = 0; i < 15; i++) {
      const view = session.view;
      if (view.kind !== "scoring") {
        throw new Error(`expected scoring view at step ${i}, got ${view.kind}`);
      }
      const score = ((i % 10) + 1) as Score;
      cast.set(view.image.image_id, score);
      session.selectScore(score);
      await session.submitScore();
    }

    expect(session.completed).toBe(15);
    expect(cast.size).toBe(15); // never re-served a scored image
    expect(new Set(session.scoredImageIds()).size).toBe(15);
    expect(session.view.kind).toBe("scoring"); // one of 16 images remains

    for (const [imageId, score] of cast) {
      const dist = await api.distribution(imageId);
      expect(dist.n_ballots).toBe(1);
      expect(dist.p[score - 1]).toBe(1); // exactly the scripted ballot
      expect(dist.mean).toBeCloseTo(score, 12);
    }
  }, 60_000);

  it("histogram for crowd ballots {5,5,6,6} shows mean 5.5 / std 0.5", async () => {
    const probe = await api.nextImage("histogram-crowd-probe");
    const imageId = probe.image_id; // the leftover image: fewest ballots
    const scores: Score[] = [5, 5, 6, 6];
    for (let k = 0; k < scores.length; k++) {
      await api.submitBallot(`crowd-${k}`, imageId, scores[k]!);
    }
    const dist = await api.distribution(imageId);
    expect(dist.n_ballots).toBe(4);
    expect(dist.mean).toBeCloseTo(5.5, 12);
    expect(dist.std).toBeCloseTo(0.5, 12);

    const svg = renderHistogram(dist);
    expect(svg).toContain("mean 5.5");
    expect(svg).toContain("std 0.5");
    const heights = [...svg.matchAll(/<rect[^>]*height="([0-9.]+)"/g)].map((m) => Number(m[1]));
    expect(heights[4]).toBe(heights[5]);
    expect(heights.filter((h) => h > 0)).toHaveLength(2);
  }, 60_000);

  it("qualified flips on the 15th ballot through the API", async () => {
    const probe = await api.nextImage("qualified-probe");
    const imageId = probe.image_id;
    const before = await api.distribution(imageId).catch(() => null);
    const already = before?.n_ballots ?? 0;
    for (let k = already; k < 15; k++) {
      const ack = await api.submitBallot(`qual-${k}`, imageId, 8);
      expect(ack.qualified).toBe(ack.n_ballots >= 15);
      expect(ack.n_ballots).toBe(k + 1);
    }
    const after = await api.distribution(imageId);
    expect(after.qualified).toBe(true);
  }, 60_000);
});
