/** Wire types for the play service. The client renders these verbatim and
 * never simulates game rules itself. */

export const SCHEMA_VERSION = 1;

export enum Action {
  UP = 0,
  DOWN = 1,
  LEFT = 2,
  RIGHT = 3,
  STAY = 4,
}

export type Mode = "hotseat" | "human-vs-agent" | "agent-demo";

export type CellKind = "empty" | "car" | "frogA" | "frogB";

export interface Cell {
  kind: CellKind;
  /** Signed cells-per-tick; present only on car cells. */
  velocity?: number;
}

export type FrogStatus = "ACTIVE" | "FINISHED" | "DEAD";

export interface FrogView {
  row: number;
  col: number;
  status: FrogStatus;
  last_reward: number;
  cumulative_reward: number;
  human: boolean;
  pending: boolean;
}

export type Outcome = "NONE" | "SUCCESS" | "COLLISION" | "TIMEOUT";

export interface StateMessage {
  schema_version: number;
  session_id: string;
  mode: Mode;
  tick: number;
  grid: Cell[][];
  frogs: FrogView[];
  outcome: Outcome;
  done: boolean;
}

export interface ActionResponse {
  resolved: boolean;
  state: StateMessage;
}

export interface HintResponse {
  action: Action;
  action_name: string;
}

export const GRID_SIZE = 8;
export const GOAL_ROW = 0;
export const START_ROW = 7;
