/**
 * Scripted end-to-end session against a real annotation service.
 *
 * Spawns the Python server on an ephemeral port with a generated
 * manifest, plays a rater that toggles each trial at least twice and
 * always picks the on-screen LEFT candidate, then checks the export:
 * every stored choice must be the canonical label of whatever the left
 * panel showed, regardless of the randomized placement.
 */

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient, NoTrialsRemaining } from "../src/api.js";
import { TrialController } from "../src/controller.js";

const PYTHON = process.env.CDIQA_PYTHON ?? "python3";

let workDir: string;
let server: ChildProcess | null = null;
let baseUrl: string;
let api: ApiClient;

async function startServer(manifestDir: string): Promise<number> {
  server = spawn(
    PYTHON,
    ["-m", "cdiqa.cli", "serve",
      "--manifest", join(manifestDir, "trials.json"),
      "--images", manifestDir,
      "--port", "0",
      "--log", join(manifestDir, "judgments.jsonl")],
    { stdio: ["ignore", "pipe", "inherit"] },
  );
  const proc = server;
  return new Promise<number>((resolve, reject) => {
    let buffer = "";
    const timer = setTimeout(() => reject(new Error(`server did not start: ${buffer}`)), 20000);
    proc.stdout!.on("data", (chunk: Buffer) => {
      buffer += chunk.toString();
      const match = buffer.match(/http:\/\/127\.0\.0\.1:(\d+)\//);
      if (match) {
        clearTimeout(timer);
        resolve(Number(match[1]));
      }
    });
    proc.on("exit", (code) => {
      clearTimeout(timer);
      reject(new Error(`server exited early (${code}): ${buffer}`));
    });
  });
}

beforeAll(async () => {
  workDir = mkdtempSync(join(tmpdir(), "cdiqa-ui-"));
  const gen = spawnSync(PYTHON, [join(__dirname, "make_fixture.py"), workDir], {
    encoding: "utf-8",
  });
  if (gen.status !== 0) {
    throw new Error(`fixture generation failed: ${gen.stderr}`);
  }
  const port = await startServer(workDir);
  baseUrl = `http://127.0.0.1:${port}`;
  api = new ApiClient(baseUrl);
}, 40000);

afterAll(() => {
  server?.kill();
  rmSync(workDir, { recursive: true, force: true });
});

describe("scripted annotation session", () => {
  const RATER = "scripted-rater";
  const intended: Array<{ trial: string; choice: string; toggles: number }> = [];

  it("completes 4 trials with at least 2 toggles each", async () => {
    for (let i = 0; i < 4; i++) {
      const payload = await api.nextTrial(RATER);
      const c = new TrialController(payload);

      expect(c.canSubmit).toBe(false); // forced choice: submit is blocked

      c.toggle();
      c.toggle();
      if (i % 2 === 1) {
        c.toggle();
      }
      expect(c.toggleCount).toBeGreaterThanOrEqual(2);

      c.select("left");
      const body = c.buildJudgment(RATER);
      expect(body.choice).toBe(c.labelFor("left"));
      const ack = await api.submitWithRetry(body);
      expect(ack.seq).toBe(i);
      intended.push({ trial: payload.trial_id, choice: body.choice, toggles: body.toggles });
    }
    expect(intended).toHaveLength(4);
    expect(new Set(intended.map((x) => x.trial)).size).toBe(4);
  }, 30000);

  it("serves the trial images as PNG", async () => {
    const payload = await api.nextTrial(`peek-${Date.now()}`);
    for (const url of Object.values(payload.images)) {
      const resp = await fetch(`${baseUrl}${url}`);
      expect(resp.status).toBe(200);
      const bytes = new Uint8Array(await resp.arrayBuffer());
      expect(Array.from(bytes.slice(0, 4))).toEqual([0x89, 0x50, 0x4e, 0x47]);
    }
  }, 30000);

  it("export reproduces the judgments with canonical choices", async () => {
    const doc = (await api.exportTrials()) as {
      trials: Array<{ id: string; judgments: Array<Record<string, unknown>> }>;
    };
    const mine = new Map<string, Record<string, unknown>>();
    for (const trial of doc.trials) {
      for (const j of trial.judgments) {
        if (j.rater_id === RATER) {
          mine.set(trial.id, j);
        }
      }
    }
    expect(mine.size).toBe(4);
    for (const want of intended) {
      const got = mine.get(want.trial)!;
      expect(got.choice).toBe(want.choice);
      expect(got.toggles).toBe(want.toggles);
    }
  });

  it("reports no trials remaining once the rater has judged everything", async () => {
    // the fixture has 5 trials; finish the fifth, then expect exhaustion
    const payload = await api.nextTrial(RATER);
    const c = new TrialController(payload);
    c.toggle();
    c.toggle();
    c.select("right");
    await api.submitWithRetry(c.buildJudgment(RATER));
    await expect(api.nextTrial(RATER)).rejects.toBeInstanceOf(NoTrialsRemaining);
  }, 30000);
});
