import { describe, expect, it } from "vitest";
import { mapKey } from "../src/input.js";
import { Action } from "../src/types.js";

describe("player 1 bindings (arrows + space)", () => {
  it.each([
    ["ArrowUp", Action.UP],
    ["ArrowDown", Action.DOWN],
    ["ArrowLeft", Action.LEFT],
    ["ArrowRight", Action.RIGHT],
    [" ", Action.STAY],
  ])("%s -> frog 0 %s", (key, action) => {
    expect(mapKey(key, "hotseat")).toEqual({ frog: 0, action });
  });
});

describe("player 2 bindings (WASD + shift)", () => {
  it.each([
    ["w", Action.UP],
    ["s", Action.DOWN],
    ["a", Action.LEFT],
    ["d", Action.RIGHT],
    ["W", Action.UP],
    ["Shift", Action.STAY],
  ])("%s -> frog 1 %s in hotseat", (key, action) => {
    expect(mapKey(key, "hotseat")).toEqual({ frog: 1, action });
  });

  it("is dead in human-vs-agent mode (frog B is the agent)", () => {
    for (const key of ["w", "a", "s", "d", "Shift"]) {
      expect(mapKey(key, "human-vs-agent")).toBeNull();
    }
    expect(mapKey("ArrowUp", "human-vs-agent")).toEqual({
      frog: 0,
      action: Action.UP,
    });
  });
});

describe("mode gating", () => {
  it("all movement keys are dead in agent-demo", () => {
    for (const key of ["ArrowUp", " ", "w", "Shift"]) {
      expect(mapKey(key, "agent-demo")).toBeNull();
    }
  });

  it("unbound keys map to nothing", () => {
    expect(mapKey("q", "hotseat")).toBeNull();
    expect(mapKey("Enter", "hotseat")).toBeNull();
  });
});
