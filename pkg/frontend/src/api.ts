// Typed client for the design service. SSE is parsed over fetch streams so
// the same code runs in the browser and under node-based tests.

import type { DesignResult, JobInfo, ProgressEvent, SceneDoc } from "./types";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function expectJson<T>(resp: Response): Promise<T> {
  if (!resp.ok) {
    let detail = resp.statusText;
    try {
      const body = (await resp.json()) as { error?: string };
      if (body.error) detail = body.error;
    } catch {
      // non-JSON error body
    }
    throw new ApiError(resp.status, detail);
  }
  return (await resp.json()) as T;
}

export class StudioApi {
  constructor(private base: string, private fetchFn: typeof fetch = fetch) {}

  async createScene(doc: SceneDoc): Promise<{ id: string; revision: number }> {
    const resp = await this.fetchFn(`${this.base}/api/v1/scenes`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(doc),
    });
    return expectJson(resp);
  }

  async getScene(id: string): Promise<{ id: string; revision: number; scene: SceneDoc }> {
    return expectJson(await this.fetchFn(`${this.base}/api/v1/scenes/${id}`));
  }

  async updateScene(
    id: string,
    doc: SceneDoc,
    revision: number,
  ): Promise<{ id: string; revision: number }> {
    const resp = await this.fetchFn(`${this.base}/api/v1/scenes/${id}`, {
      method: "PUT",
      headers: { "content-type": "application/json", "If-Match": String(revision) },
      body: JSON.stringify(doc),
    });
    return expectJson(resp);
  }

  async submitJob(kind: string, sceneId: string, config: unknown): Promise<string> {
    const resp = await this.fetchFn(`${this.base}/api/v1/jobs`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ kind, scene_id: sceneId, config }),
    });
    const body = await expectJson<{ id: string }>(resp);
    return body.id;
  }

  async getJob(id: string): Promise<JobInfo> {
    return expectJson(await this.fetchFn(`${this.base}/api/v1/jobs/${id}`));
  }

  async cancelJob(id: string): Promise<void> {
    await expectJson(
      await this.fetchFn(`${this.base}/api/v1/jobs/${id}/cancel`, { method: "POST" }),
    );
  }

  async getResult(id: string): Promise<DesignResult> {
    return expectJson(await this.fetchFn(`${this.base}/api/v1/jobs/${id}/result`));
  }

  /** Stream progress events until the server closes with an `end` event. */
  async streamEvents(
    jobId: string,
    onEvent: (name: string, data: ProgressEvent) => void,
    signal?: AbortSignal,
  ): Promise<void> {
    const resp = await this.fetchFn(`${this.base}/api/v1/jobs/${jobId}/events`, { signal });
    if (!resp.ok || resp.body === null) {
      throw new ApiError(resp.status, "event stream unavailable");
    }
    const reader = resp.body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    for (;;) {
      const { value, done } = await reader.read();
      if (done) return;
      buffer += decoder.decode(value, { stream: true });
      let sep;
      while ((sep = buffer.indexOf("\n\n")) >= 0) {
        const block = buffer.slice(0, sep);
        buffer = buffer.slice(sep + 2);
        let name = "message";
        let data = "";
        for (const line of block.split("\n")) {
          if (line.startsWith("event:")) name = line.slice(6).trim();
          else if (line.startsWith("data:")) data += line.slice(5).trim();
        }
        let parsed: ProgressEvent = { type: name };
        if (data) {
          try {
            parsed = { type: name, ...(JSON.parse(data) as object) } as ProgressEvent;
          } catch {
            // keepalives may carry empty payloads
          }
        }
        onEvent(name, parsed);
        if (name === "end") return;
      }
    }
  }

  /** Stream with reconnect-and-backoff until a terminal event arrives. */
  async monitorJob(
    jobId: string,
    onEvent: (name: string, data: ProgressEvent) => void,
    maxRetries = 5,
  ): Promise<JobInfo> {
    let attempt = 0;
    for (;;) {
      try {
        await this.streamEvents(jobId, onEvent);
        return await this.getJob(jobId);
      } catch (err) {
        attempt += 1;
        if (attempt > maxRetries) throw err;
        await new Promise((r) => setTimeout(r, Math.min(1000 * 2 ** attempt, 10_000)));
        const job = await this.getJob(jobId);
        if (job.status === "done" || job.status === "failed") return job;
      }
    }
  }
}
