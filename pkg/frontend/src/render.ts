/** DOM renderer: an 8x8 grid of divs plus HUD, outcome banner, and a text
 * log pane mirroring every state change. No canvas/game-engine dependency;
 * the board only changes when a new StateMessage arrives. */

import { BoardViewModel } from "./store.js";
import { Cell } from "./types.js";

function cellText(cell: Cell): string {
  switch (cell.kind) {
    case "frogA":
      return "🐸A";
    case "frogB":
      return "🐸B";
    case "car":
      return (cell.velocity ?? 0) > 0 ? "▶" : "◀";
    default:
      return "";
  }
}

function speedBadge(cell: Cell): string {
  const v = Math.abs(cell.velocity ?? 0);
  return v > 1 ? String(v) : "";
}

export class BoardRenderer {
  private cells: HTMLElement[][] = [];
  private hud: HTMLElement;
  private banner: HTMLElement;
  private waiting: HTMLElement;
  private logPane: HTMLElement;
  private hintOverlay: HTMLElement;

  constructor(root: HTMLElement) {
    const board = document.createElement("div");
    board.className = "board";
    for (let r = 0; r < 8; r++) {
      const rowEl = document.createElement("div");
      rowEl.className = "row";
      const row: HTMLElement[] = [];
      for (let c = 0; c < 8; c++) {
        const cell = document.createElement("div");
        cell.className = "cell";
        if (r === 0) cell.classList.add("goal");
        if (r === 7) cell.classList.add("start");
        rowEl.appendChild(cell);
        row.push(cell);
      }
      board.appendChild(rowEl);
      this.cells.push(row);
    }
    this.hud = el("div", "hud");
    this.banner = el("div", "banner");
    this.waiting = el("div", "waiting");
    this.hintOverlay = el("div", "hint");
    this.logPane = el("pre", "log");
    this.logPane.setAttribute("role", "log");
    this.logPane.setAttribute("aria-live", "polite");
    root.append(this.hud, board, this.waiting, this.banner, this.hintOverlay, this.logPane);
  }

  render(vm: BoardViewModel, waitingForPartner: boolean, log: string[]): void {
    for (let r = 0; r < 8; r++) {
      for (let c = 0; c < 8; c++) {
        const cell = vm.cells[r][c];
        const node = this.cells[r][c];
        node.textContent = cellText(cell) + speedBadge(cell);
        node.className = "cell" + (r === vm.goalRow ? " goal" : "") +
          (r === vm.startRow ? " start" : "") +
          (cell.kind === "car" ? " car" : "");
      }
    }
    const frogs = vm.hud.frogs
      .map((f, i) =>
        `${"AB"[i]}: ${f.status.toLowerCase()} ` +
        `reward ${f.cumulative_reward >= 0 ? "+" : ""}${f.cumulative_reward}` +
        (f.pending ? " (committed)" : ""))
      .join("   ");
    this.hud.textContent = `tick ${vm.hud.tick}   ${frogs}`;
    this.waiting.textContent = waitingForPartner ? "waiting for partner…" : "";
    if (vm.hud.done) {
      this.banner.textContent = `${vm.hud.outcome} — press R to reset`;
      this.banner.className = `banner shown outcome-${vm.hud.outcome.toLowerCase()}`;
    } else {
      this.banner.textContent = "";
      this.banner.className = "banner";
    }
    this.logPane.textContent = log.slice(-12).join("\n");
  }

  showHint(actionName: string | null): void {
    this.hintOverlay.textContent = actionName === null ? "" : `suggested: ${actionName}`;
  }

  showConnection(connected: boolean): void {
    if (!connected) {
      this.banner.textContent = "connection lost — retrying…";
      this.banner.className = "banner shown outcome-none";
    }
  }
}

function el(tag: string, cls: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = cls;
  return node;
}
