/** Scripted-client test against the real play service: in hotseat mode the
 * board must not change until both players have committed, and then exactly
 * one tick advances. Requires python3 with the game package installed. */

import { ChildProcess, spawn } from "node:child_process";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { PlayClient } from "../src/net.js";
import { Store } from "../src/store.js";
import { Action } from "../src/types.js";

const PORT = 7791;
const BASE = `http://127.0.0.1:${PORT}`;

const SERVER_SCRIPT = `
import uvicorn
from quantumfrog.env import EnvConfig
from quantumfrog.server import build_app
app = build_app(default_mode="hotseat", default_env=EnvConfig(frogs=2, cars=2))
uvicorn.run(app, host="127.0.0.1", port=${PORT}, log_level="error")
`;

let server: ChildProcess;

async function waitForServer(): Promise<void> {
  for (let i = 0; i < 100; i++) {
    try {
      await fetch(`${BASE}/sessions/none`);
      return;
    } catch {
      await new Promise((r) => setTimeout(r, 200));
    }
  }
  throw new Error("play service did not come up");
}

beforeAll(async () => {
  server = spawn("python3", ["-c", SERVER_SCRIPT], { stdio: "inherit" });
  await waitForServer();
}, 30_000);

afterAll(() => {
  server?.kill();
});

describe("hotseat tick barrier", () => {
  it("one submission leaves the board unchanged; the second advances exactly one tick", async () => {
    const client = new PlayClient(BASE);
    const store = new Store();
    const { session_id, state } = await client.createSession({ seed: 11 });
    store.apply(state);
    const boardBefore = JSON.stringify(store.viewModel().cells);
    expect(store.viewModel().hud.tick).toBe(0);

    // player 1 commits UP — no tick may resolve yet
    const first = await client.submitAction(session_id, 0, Action.UP);
    expect(first.resolved).toBe(false);
    store.apply(first.state);
    expect(store.viewModel().hud.tick).toBe(0);
    expect(JSON.stringify(store.viewModel().cells)).toBe(boardBefore);
    expect(store.waitingForPartner()).toBe(true);

    // a fresh fetch of the state agrees: still frozen
    store.apply(await client.getState(session_id));
    expect(store.viewModel().hud.tick).toBe(0);

    // player 2 commits — exactly one tick resolves
    const second = await client.submitAction(session_id, 1, Action.STAY);
    expect(second.resolved).toBe(true);
    store.apply(second.state);
    expect(store.viewModel().hud.tick).toBe(1);
    expect(store.viewModel().hud.frogs[0].row).toBe(6); // A moved up
    expect(store.viewModel().hud.frogs[1].row).toBe(7); // B stayed
    expect(store.waitingForPartner()).toBe(false);
  });

  it("double-submit is rejected server-side and the client stays consistent", async () => {
    const client = new PlayClient(BASE);
    const store = new Store();
    const { session_id, state } = await client.createSession({ seed: 3 });
    store.apply(state);
    store.markSubmitted(0);
    await client.submitAction(session_id, 0, Action.UP);
    await expect(client.submitAction(session_id, 0, Action.DOWN)).rejects.toMatchObject({
      status: 409,
    });
    store.apply(await client.getState(session_id));
    expect(store.viewModel().hud.tick).toBe(0);
  });

  it("reset with the same seed reproduces the initial board", async () => {
    const client = new PlayClient(BASE);
    const a = await client.createSession({ seed: 21 });
    const fresh = await client.reset(a.session_id, 21);
    expect(fresh.grid).toEqual(a.state.grid);
    expect(fresh.tick).toBe(0);
  });
});
