/** Session view-model: binds the API to a render callback and guards
 *  against duplicate outcome submissions. */

import {
  ApiError,
  Instruction,
  RosterEntry,
  SessionApi,
  Snapshot,
} from "./api.js";

export interface ViewState {
  sessionId: string | null;
  strategy: string | null;
  snapshot: Snapshot | null;
  instruction: Instruction | null;
  submitting: boolean;
  error: string | null;
  staleInstruction: boolean;
}

export class SessionController {
  readonly state: ViewState = {
    sessionId: null,
    strategy: null,
    snapshot: null,
    instruction: null,
    submitting: false,
    error: null,
    staleInstruction: false,
  };

  constructor(
    private readonly api: SessionApi,
    private readonly onChange: (s: ViewState) => void = () => {},
  ) {}

  private emit(): void {
    this.onChange(this.state);
  }

  async createSession(
    risk: { x: number; y?: number },
    roster: RosterEntry[],
    strategy?: string,
  ): Promise<void> {
    this.state.error = null;
    try {
      const created = await this.api.createSession(risk, roster, strategy);
      this.state.sessionId = created.session_id;
      this.state.strategy = created.strategy;
      await this.refresh();
    } catch (e) {
      this.state.error = e instanceof ApiError ? e.message : String(e);
      this.emit();
    }
  }

  async attach(sessionId: string): Promise<void> {
    this.state.sessionId = sessionId;
    await this.refresh();
    this.state.strategy = this.state.snapshot?.strategy ?? null;
    this.emit();
  }

  /** Pull the server's view; the roster chips are used verbatim. */
  async refresh(): Promise<void> {
    if (!this.state.sessionId) return;
    const snap = await this.api.snapshot(this.state.sessionId);
    this.state.snapshot = snap;
    if (!snap.complete) {
      const nxt = await this.api.next(this.state.sessionId);
      this.state.instruction = nxt.complete ? null : (nxt.instruction ?? null);
      if (nxt.complete) this.state.snapshot.complete = true;
    } else {
      this.state.instruction = null;
    }
    this.emit();
  }

  /** Submit the outcome for the outstanding instruction. Re-entrant calls
   *  while a submission is in flight are dropped (double-click guard). */
  async submit(outcome: "+" | "-"): Promise<boolean> {
    const { sessionId, instruction } = this.state;
    if (!sessionId || !instruction || this.state.submitting) return false;
    this.state.submitting = true;
    this.state.error = null;
    this.emit();
    try {
      await this.api.submitOutcome(
        sessionId,
        instruction.instruction_id,
        outcome,
      );
      this.state.instruction = null;
      await this.refresh();
      return true;
    } catch (e) {
      if (e instanceof ApiError && e.status === 409) {
        this.state.staleInstruction = true;
        await this.refresh();
      } else {
        this.state.error = e instanceof ApiError ? e.message : String(e);
      }
      return false;
    } finally {
      this.state.submitting = false;
      this.emit();
    }
  }
}

/** Parse pasted roster text: one id per line, "!" suffix marks urgency,
 *  ":stratum" suffix assigns a stratum. */
export function parseRoster(text: string): RosterEntry[] {
  const entries: RosterEntry[] = [];
  for (const raw of text.split(/\r?\n/)) {
    let line = raw.trim();
    if (!line) continue;
    let urgent = false;
    if (line.endsWith("!")) {
      urgent = true;
      line = line.slice(0, -1).trim();
    }
    let stratum: string | undefined;
    const colon = line.indexOf(":");
    if (colon >= 0) {
      stratum = line.slice(colon + 1).trim() || undefined;
      line = line.slice(0, colon).trim();
    }
    if (line) entries.push({ id: line, stratum, urgent });
  }
  return entries;
}
