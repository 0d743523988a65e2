/** Keyboard bindings: player 1 on arrows + space, player 2 on WASD + shift.
 * Pure key-to-intent mapping; enablement rules live with the store. */

import { Action, Mode } from "./types.js";

export interface KeyIntent {
  frog: number;
  action: Action;
}

const PLAYER1: Record<string, Action> = {
  ArrowUp: Action.UP,
  ArrowDown: Action.DOWN,
  ArrowLeft: Action.LEFT,
  ArrowRight: Action.RIGHT,
  " ": Action.STAY,
};

const PLAYER2: Record<string, Action> = {
  w: Action.UP,
  s: Action.DOWN,
  a: Action.LEFT,
  d: Action.RIGHT,
  Shift: Action.STAY,
};

/** Map a key to (frog, action), or null if unbound or disabled in this
 * mode. Player 2 keys are dead outside hotseat: in human-vs-agent frog B is
 * the agent's, and in agent-demo nobody is human. */
export function mapKey(key: string, mode: Mode): KeyIntent | null {
  if (mode === "agent-demo") return null;
  const p1 = PLAYER1[key];
  if (p1 !== undefined) return { frog: 0, action: p1 };
  if (mode !== "hotseat") return null;
  const p2 = PLAYER2[key.length === 1 ? key.toLowerCase() : key];
  if (p2 !== undefined) return { frog: 1, action: p2 };
  return null;
}
