/** Typed client for the session HTTP API. All view state comes from here;
 *  the UI never computes a member status on its own. */

export interface RosterEntry {
  id: string;
  stratum?: string;
  urgent?: boolean;
}

export interface MemberChip {
  id: string;
  status: "PENDING" | "POS" | "NEG";
  urgent: boolean;
  guaranteed_slot: string | null;
  repooled: number;
}

export interface Instruction {
  instruction_id: number;
  pool: string[];
  slots: string[];
  guaranteed: string[];
  step_note: string;
}

export interface Snapshot {
  session_id: string;
  strategy: string;
  risk: { x: number; y?: number };
  roster: MemberChip[];
  complete: boolean;
  tests_used: number;
  resolved_count: number;
  total: number;
  instruction: Instruction | null;
}

export interface NextResponse {
  complete: boolean;
  instruction?: Instruction;
  statuses?: Record<string, string>;
}

export interface StateDelta {
  resolved: Record<string, string>;
  repooled: string[];
  complete: boolean;
}

export interface HistoryEvent {
  kind: string;
  instruction_seq?: number;
  outcome?: boolean;
  ts?: number;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

type FetchLike = typeof fetch;

export class SessionApi {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await this.fetchImpl(this.baseUrl + path, {
      headers: { "Content-Type": "application/json" },
      ...init,
    });
    const body = await res.json();
    if (!res.ok) {
      const err = body?.error ?? { code: "HttpError", message: res.statusText };
      throw new ApiError(res.status, err.code, err.message);
    }
    return body as T;
  }

  createSession(
    risk: { x: number; y?: number },
    roster: RosterEntry[],
    strategy?: string,
  ): Promise<{ session_id: string; strategy: string }> {
    return this.request("/sessions", {
      method: "POST",
      body: JSON.stringify({ risk, roster, strategy: strategy ?? null }),
    });
  }

  next(sessionId: string): Promise<NextResponse> {
    return this.request(`/sessions/${sessionId}/next`);
  }

  submitOutcome(
    sessionId: string,
    instructionId: number,
    outcome: "+" | "-",
  ): Promise<StateDelta> {
    return this.request(`/sessions/${sessionId}/outcome`, {
      method: "POST",
      body: JSON.stringify({ instruction_id: instructionId, outcome }),
    });
  }

  snapshot(sessionId: string): Promise<Snapshot> {
    return this.request(`/sessions/${sessionId}/statuses`);
  }

  history(sessionId: string): Promise<{ events: HistoryEvent[] }> {
    return this.request(`/sessions/${sessionId}/history`);
  }
}
