/** REST + server-sent-events client (fetch-based, works in browsers and
 * Node 20 alike). */
import type { JobEvent, ServerProblem, ValidationIssue } from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: ValidationIssue[],
  ) {
    super(`HTTP ${status}: ${detail.map((d) => d.code).join(", ") || "error"}`);
  }
}

async function parseError(response: Response): Promise<ApiError> {
  let detail: ValidationIssue[] = [];
  try {
    const body = (await response.json()) as { detail?: unknown };
    if (Array.isArray(body.detail)) {
      detail = body.detail.map((d) =>
        typeof d === "object" && d !== null && "code" in d
          ? (d as ValidationIssue)
          : { code: "request_error", msg: JSON.stringify(d), loc: [] },
      );
    }
  } catch {
    // non-JSON error body
  }
  return new ApiError(response.status, detail);
}

export class ApiClient {
  constructor(public base: string) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(this.base + path, {
      headers: { "content-type": "application/json" },
      ...init,
    });
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as T;
  }

  createProblem(body: Record<string, unknown>): Promise<ServerProblem> {
    return this.request("/api/problems", { method: "POST", body: JSON.stringify(body) });
  }

  startJob(body: Record<string, unknown>): Promise<{ job_id: string }> {
    return this.request("/api/jobs", { method: "POST", body: JSON.stringify(body) });
  }

  jobState(jobId: string): Promise<Record<string, unknown>> {
    return this.request(`/api/jobs/${jobId}`);
  }

  cancelJob(jobId: string): Promise<Record<string, unknown>> {
    return this.request(`/api/jobs/${jobId}`, { method: "DELETE" });
  }

  listCheckpoints(): Promise<Record<string, unknown>[]> {
    return this.request("/api/checkpoints");
  }

  loadCheckpoint(path: string): Promise<Record<string, unknown>> {
    return this.request("/api/checkpoints/load", {
      method: "POST",
      body: JSON.stringify({ path }),
    });
  }

  /** Stream a job's SSE feed; resolves when the stream ends. On drop,
   * the caller can poll jobState and resubscribe. */
  async streamEvents(jobId: string, onEvent: (event: JobEvent) => void): Promise<void> {
    const response = await fetch(`${this.base}/api/jobs/${jobId}/events`);
    if (!response.ok || response.body === null) throw await parseError(response);
    const reader = response.body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    for (;;) {
      const { done, value } = await reader.read();
      if (done) break;
      buffer += decoder.decode(value, { stream: true });
      let sep;
      while ((sep = buffer.indexOf("\n\n")) >= 0) {
        const block = buffer.slice(0, sep);
        buffer = buffer.slice(sep + 2);
        const event = parseSseBlock(block);
        if (event) onEvent(event);
      }
    }
  }
}

export function parseSseBlock(block: string): JobEvent | null {
  let event = "message";
  const dataLines: string[] = [];
  for (const line of block.split("\n")) {
    if (line.startsWith("event: ")) event = line.slice(7).trim();
    else if (line.startsWith("data: ")) dataLines.push(line.slice(6));
  }
  if (dataLines.length === 0) return null;
  return {
    event: event as JobEvent["event"],
    data: JSON.parse(dataLines.join("\n")) as Record<string, unknown>,
  };
}
