/** fetch stand-in that replays responses recorded from the real HTTP
 *  service (tests/fixtures/a4_scenario.json). */

import fixture from "./fixtures/a4_scenario.json";

interface Recorded {
  method: string;
  path: string;
  status: number;
  body: unknown;
}

function response(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

export class FakeServer {
  readonly calls: { method: string; url: string; body?: unknown }[] = [];
  private readonly queues = new Map<string, Recorded[]>();

  constructor() {
    for (const step of fixture.steps as Recorded[]) {
      const key = `${step.method} ${step.path}`;
      const q = this.queues.get(key) ?? [];
      q.push(step);
      this.queues.set(key, q);
    }
    // the recording stops after the third outcome; the fixture's
    // "duplicate" block holds the following /next and /outcome exchanges
    this.queues.get("GET /next")!.push({
      method: "GET",
      path: "/next",
      status: 200,
      body: fixture.duplicate.next,
    });
    this.queues.get("POST /outcome")!.push(
      {
        method: "POST",
        path: "/outcome",
        status: fixture.duplicate.first.status,
        body: fixture.duplicate.first.body,
      },
      {
        method: "POST",
        path: "/outcome",
        status: fixture.duplicate.dup.status,
        body: fixture.duplicate.dup.body,
      },
    );
  }

  get sessionId(): string {
    return fixture.session_id;
  }

  private keyFor(method: string, url: string): string {
    if (url.endsWith("/sessions")) return `${method} /sessions`;
    if (url.endsWith("/next")) return `${method} /next`;
    if (url.endsWith("/outcome")) return `${method} /outcome`;
    if (url.endsWith("/statuses")) return `${method} /statuses`;
    if (url.endsWith("/history")) return `${method} /history`;
    throw new Error(`unexpected url ${url}`);
  }

  readonly fetch = async (
    input: RequestInfo | URL,
    init?: RequestInit,
  ): Promise<Response> => {
    const url = String(input);
    const method = init?.method ?? "GET";
    this.calls.push({
      method,
      url,
      body: init?.body ? JSON.parse(String(init.body)) : undefined,
    });
    const key = this.keyFor(method, url);
    const q = this.queues.get(key);
    const step = q?.shift();
    if (!step) {
      // past the end of the recording: keep serving the final snapshot
      if (key === "GET /statuses") {
        const snaps = (fixture.steps as Recorded[]).filter(
          (s) => s.path === "/statuses",
        );
        return response(200, snaps[snaps.length - 1].body);
      }
      throw new Error(`no recorded response left for ${key}`);
    }
    return response(step.status, step.body);
  };
}
