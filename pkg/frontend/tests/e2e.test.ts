/** End-to-end: the UI drives a real annotation server spawned as a subprocess.
 *
 * Covers the shipping criterion for the browser interface: a 10-record queue
 * is fully labeled through the DOM (including one non-valid with a reason),
 * the server store ends up with exactly 10 labels even under a double click,
 * and two scripted annotators giving identical verdicts produce κ = 1.0 at the
 * agreement endpoint.
 */

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtemp, readFile } from "node:fs/promises";
import * as http from "node:http";
import { tmpdir } from "node:os";
import * as path from "node:path";

import { afterAll, beforeAll, describe, expect, it, vi } from "vitest";

import { ApiClient, ApiError, type FetchFn } from "../src/api.js";
import { App } from "../src/app.js";

// vitest runs with the package root as cwd; import.meta.url is unusable here
// because the DOM emulation rewrites module URLs to http ones.
const FIXTURE = path.resolve(process.cwd(), "tests/fixtures/mini_corpus.json");

/** Plain node:http transport so the DOM emulation never touches the network. */
const nodeFetch: FetchFn = (url, init) =>
  new Promise((resolve, reject) => {
    const request = http.request(
      url,
      { method: init?.method ?? "GET", headers: init?.headers },
      (response) => {
        const chunks: Buffer[] = [];
        response.on("data", (chunk: Buffer) => chunks.push(chunk));
        response.on("end", () => {
          const status = response.statusCode ?? 0;
          const text = Buffer.concat(chunks).toString("utf-8");
          resolve({
            ok: status >= 200 && status < 300,
            status,
            statusText: response.statusMessage ?? "",
            json: async () => JSON.parse(text) as unknown,
          });
        });
      },
    );
    request.on("error", reject);
    if (init?.body) request.write(init.body);
    request.end();
  });

const sleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

interface ServerHandle {
  proc: ChildProcess;
  base: string;
  store: string;
}

async function startServer(port: number, annotators: string): Promise<ServerHandle> {
  const store = await mkdtemp(path.join(tmpdir(), "annotation-ui-e2e-"));
  const base = `http://127.0.0.1:${port}`;
  const proc = spawn(
    "nlas",
    [
      "annotate", "serve",
      "--corpus", FIXTURE,
      "--store", store,
      "--annotators", annotators,
      "--overlap", "1.0",
      "--bind", `127.0.0.1:${port}`,
    ],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  let stderr = "";
  proc.stderr?.on("data", (chunk: Buffer) => {
    stderr += chunk.toString();
  });
  let exited = false;
  proc.on("exit", () => {
    exited = true;
  });

  const deadline = Date.now() + 45_000;
  for (;;) {
    if (exited) throw new Error(`annotation server exited early:\n${stderr}`);
    try {
      const probe = await nodeFetch(`${base}/api/progress`);
      if (probe.ok) break;
    } catch {
      // not listening yet
    }
    if (Date.now() > deadline) {
      throw new Error(`annotation server did not come up:\n${stderr}`);
    }
    await sleep(150);
  }
  return { proc, base, store };
}

async function readStoredLabels(store: string) {
  const text = await readFile(path.join(store, "labels.jsonl"), "utf-8");
  return text
    .split("\n")
    .filter((line) => line.trim() !== "")
    .map(
      (line) =>
        JSON.parse(line) as {
          record_id: string;
          annotator: string;
          verdict: string;
          reason: string | null;
        },
    );
}

function $(id: string): HTMLElement | null {
  return document.getElementById(id);
}

function click(id: string): void {
  const node = $(id);
  if (node === null) throw new Error(`no element #${id}`);
  (node as HTMLButtonElement).click();
}

async function untilTaskOrDone(): Promise<"task" | "done"> {
  let state: "task" | "done" = "task";
  await vi.waitFor(
    () => {
      if ($("done-view") !== null) {
        state = "done";
        return;
      }
      if ($("verdict-valid") !== null) {
        state = "task";
        return;
      }
      throw new Error("neither a task nor the done view is rendered");
    },
    { timeout: 15_000 },
  );
  return state;
}

/** Scripted verdict rule shared by all annotators: second-iteration records
 * are rejected for being off-topic, everything else is accepted. */
function scriptedVerdict(recordId: string): { verdict: string; reason?: string } {
  return /-i2$/.test(recordId)
    ? { verdict: "non_valid", reason: "topic" }
    : { verdict: "valid" };
}

interface DriveOptions {
  nonValidAt?: number;
  doubleClickAt?: number;
  script?: (recordId: string) => { verdict: string; reason?: string };
}

/** Label the whole queue through the DOM; returns the record ids seen. */
async function driveQueue(app: App, options: DriveOptions = {}): Promise<string[]> {
  await app.start();
  const seen: string[] = [];
  for (let i = 0; i < 50; i++) {
    const state = await untilTaskOrDone();
    if (state === "done") return seen;
    const recordId = $("record-id")?.textContent ?? "";
    seen.push(recordId);

    const choice =
      options.script?.(recordId) ??
      (seen.length - 1 === options.nonValidAt
        ? { verdict: "non_valid", reason: "topic" }
        : { verdict: "valid" });
    click(`verdict-${choice.verdict}`);
    if (choice.reason) click(`reason-${choice.reason}`);
    click("submit");
    if (seen.length - 1 === options.doubleClickAt) {
      click("submit"); // rapid second click while the request is in flight
    }
    await vi.waitFor(
      () => {
        if ($("record-id")?.textContent === recordId && $("done-view") === null) {
          throw new Error("still on the same task");
        }
      },
      { timeout: 15_000 },
    );
  }
  throw new Error("queue did not finish within 50 iterations");
}

describe("single annotator labels a 10-record queue", () => {
  let server: ServerHandle;

  beforeAll(async () => {
    server = await startServer(8931, "solo");
  });

  afterAll(() => {
    server.proc.kill();
  });

  it("stores exactly 10 labels, one non-valid with a reason, no duplicates", async () => {
    document.body.innerHTML = '<div id="app"></div>';
    const app = new App(document.getElementById("app") as HTMLElement, {
      api: new ApiClient(server.base, nodeFetch),
    });

    // Sign in through the form, then label everything through the DOM.
    await app.start();
    expect($("login-view")).not.toBeNull();
    ($("annotator-input") as HTMLInputElement).value = "solo";
    click("start");

    const seen = await driveQueue(app, { nonValidAt: 3, doubleClickAt: 6 });
    expect(seen).toHaveLength(10);
    expect(new Set(seen).size).toBe(10);
    expect($("done-progress")?.textContent).toContain("10 of 10");
    app.destroy();

    const labels = await readStoredLabels(server.store);
    expect(labels).toHaveLength(10);
    expect(new Set(labels.map((l) => l.record_id)).size).toBe(10);
    const nonValid = labels.filter((l) => l.verdict === "non_valid");
    expect(nonValid).toHaveLength(1);
    expect(nonValid[0].reason).toBe("topic");
    expect(labels.every((l) => l.annotator === "solo")).toBe(true);

    const client = new ApiClient(server.base, nodeFetch);
    const progress = await client.fetchProgress();
    expect(progress.total).toEqual({ assigned: 10, labeled: 10 });

    // The server also rejects a repeat submission outright.
    const tasks = JSON.parse(
      await readFile(path.join(server.store, "tasks.json"), "utf-8"),
    ) as { task_id: string }[];
    const rejection = await client
      .submitLabel(tasks[0].task_id, "solo", "valid")
      .catch((e: unknown) => e);
    expect(rejection).toBeInstanceOf(ApiError);
    expect((rejection as ApiError).status).toBe(409);
    expect((rejection as ApiError).code).toBe("AlreadyLabeled");
  });
});

describe("two scripted annotators with identical verdicts", () => {
  let server: ServerHandle;

  beforeAll(async () => {
    server = await startServer(8932, "riva,sage");
  });

  afterAll(() => {
    server.proc.kill();
  });

  it("reaches kappa = 1.0 at the agreement endpoint", async () => {
    const client = new ApiClient(server.base, nodeFetch);

    const byAnnotator: Record<string, string[]> = {};
    for (const name of ["riva", "sage"]) {
      document.body.innerHTML = '<div id="app"></div>';
      const app = new App(document.getElementById("app") as HTMLElement, {
        api: new ApiClient(server.base, nodeFetch),
        annotator: name,
      });
      byAnnotator[name] = await driveQueue(app, { script: scriptedVerdict });

      if (name === "riva") {
        // Half-done overlap: the endpoint reports the missing half, and the
        // done view swallows that and shows no agreement yet.
        expect($("agreement")).toBeNull();
        const pending = await client.fetchAgreement().catch((e: unknown) => e);
        expect(pending).toBeInstanceOf(ApiError);
        expect((pending as ApiError).status).toBe(409);
        expect((pending as ApiError).code).toBe("IncompleteOverlap");
      } else {
        expect($("agreement")?.textContent).toContain("mean pairwise κ = 1.000");
      }
      app.destroy();
    }

    expect(byAnnotator.riva).toHaveLength(10);
    expect(byAnnotator.sage).toHaveLength(10);

    const labels = await readStoredLabels(server.store);
    expect(labels).toHaveLength(20);
    const verdictMap = (name: string) =>
      new Map(
        labels.filter((l) => l.annotator === name).map((l) => [l.record_id, l.verdict]),
      );
    const riva = verdictMap("riva");
    const sage = verdictMap("sage");
    expect(riva.size).toBe(10);
    expect(sage.size).toBe(10);
    expect(Object.fromEntries(riva)).toEqual(Object.fromEntries(sage));
    // Both verdict classes occur, so the 1.0 below is not a degenerate case.
    expect(new Set(riva.values())).toEqual(new Set(["valid", "non_valid"]));

    const agreement = await client.fetchAgreement();
    expect(agreement.n_records).toBe(10);
    expect(agreement.pairs).toHaveLength(1);
    expect(agreement.pairs[0].annotators).toEqual(["riva", "sage"]);
    expect(agreement.pairs[0].n).toBe(10);
    expect(agreement.pairs[0].kappa).toBe(1.0);
    expect(agreement.mean_kappa).toBe(1.0);
    expect(agreement.fleiss_kappa).toBe(1.0);
  });
});
