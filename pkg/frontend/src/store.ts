/** Client state: a thin, pure cache of the last StateMessage received.
 *
 * There is deliberately no game logic here. The board a user sees is always
 * `latest(received messages)` — dropping, reordering within a tick, or
 * duplicating messages can never make the client drift from the server,
 * because nothing is ever predicted or extrapolated. */

import {
  Cell,
  FrogView,
  GRID_SIZE,
  Mode,
  Outcome,
  SCHEMA_VERSION,
  StateMessage,
} from "./types.js";

export class SchemaMismatchError extends Error {
  constructor(got: number) {
    super(`server speaks schema v${got}, client expects v${SCHEMA_VERSION}`);
  }
}

export interface HudViewModel {
  tick: number;
  outcome: Outcome;
  done: boolean;
  frogs: FrogView[];
}

export interface BoardViewModel {
  /** Row-major 8x8 cells, row 0 = goal row at the top. */
  cells: Cell[][];
  goalRow: number;
  startRow: number;
  hud: HudViewModel;
}

export class Store {
  private state: StateMessage | null = null;
  /** Frogs with an action submitted locally but no tick resolution yet. */
  private inflight = new Set<number>();
  private listeners: Array<(vm: BoardViewModel) => void> = [];
  readonly log: string[] = [];

  /** Accept a StateMessage from any channel (HTTP response or push). Stale
   * messages (older tick for the same session) are ignored so a slow HTTP
   * response cannot roll the board back behind the live channel. */
  apply(msg: StateMessage): void {
    if (msg.schema_version !== SCHEMA_VERSION) {
      throw new SchemaMismatchError(msg.schema_version);
    }
    if (
      this.state !== null &&
      msg.session_id === this.state.session_id &&
      msg.tick < this.state.tick
    ) {
      return;
    }
    const isNewTick = this.state === null || msg.tick !== this.state.tick ||
      msg.session_id !== this.state.session_id;
    this.state = msg;
    this.inflight.clear();
    for (const [i, f] of msg.frogs.entries()) {
      if (f.pending) this.inflight.add(i);
    }
    if (isNewTick) {
      this.log.push(describe(msg));
    }
    this.emit();
  }

  get current(): StateMessage | null {
    return this.state;
  }

  get mode(): Mode | null {
    return this.state?.mode ?? null;
  }

  /** True when a key for this frog should submit an action right now. */
  canSubmit(frog: number): boolean {
    const s = this.state;
    if (s === null || s.done) return false;
    const f = s.frogs[frog];
    return f !== undefined && f.human && f.status === "ACTIVE" &&
      !f.pending && !this.inflight.has(frog);
  }

  /** Record a local submission so repeated keypresses before the tick
   * resolves submit at most one action. */
  markSubmitted(frog: number): void {
    this.inflight.add(frog);
    this.emit();
  }

  /** Server rejected the submission; allow retrying. */
  clearSubmitted(frog: number): void {
    this.inflight.delete(frog);
    this.emit();
  }

  waitingForPartner(): boolean {
    const s = this.state;
    if (s === null || s.done) return false;
    const humans = s.frogs.filter((f) => f.human && f.status === "ACTIVE");
    const pending = humans.filter((_, i) => {
      const idx = s.frogs.findIndex((g) => g === humans[i]);
      return this.inflight.has(idx) || humans[i].pending;
    });
    return pending.length > 0 && pending.length < humans.length;
  }

  viewModel(): BoardViewModel {
    const s = this.state;
    if (s === null) {
      const empty: Cell[][] = Array.from({ length: GRID_SIZE }, () =>
        Array.from({ length: GRID_SIZE }, () => ({ kind: "empty" as const })));
      return {
        cells: empty,
        goalRow: 0,
        startRow: GRID_SIZE - 1,
        hud: { tick: 0, outcome: "NONE", done: false, frogs: [] },
      };
    }
    return {
      cells: s.grid,
      goalRow: 0,
      startRow: GRID_SIZE - 1,
      hud: { tick: s.tick, outcome: s.outcome, done: s.done, frogs: s.frogs },
    };
  }

  subscribe(fn: (vm: BoardViewModel) => void): void {
    this.listeners.push(fn);
  }

  private emit(): void {
    const vm = this.viewModel();
    for (const fn of this.listeners) fn(vm);
  }
}

function describe(msg: StateMessage): string {
  const frogs = msg.frogs
    .map((f, i) => `${"AB"[i]}@(${f.row},${f.col}) ${f.status}`)
    .join("  ");
  const tail = msg.done ? `  -> ${msg.outcome}` : "";
  return `tick ${msg.tick}: ${frogs}${tail}`;
}
