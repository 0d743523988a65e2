/** HTTP + live-channel client for the play service. All game state flows
 * through StateMessages produced by the server. */

import {
  Action,
  ActionResponse,
  HintResponse,
  Mode,
  StateMessage,
} from "./types.js";

export interface SessionConfig {
  mode?: Mode;
  frogs?: number;
  cars?: number;
  speeds?: number[];
  seed?: number;
  checkpoint?: string;
}

export class ServerError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const res = await fetch(url, {
    headers: { "content-type": "application/json" },
    ...init,
  });
  const body = await res.json();
  if (!res.ok) {
    throw new ServerError(res.status, body.detail ?? res.statusText);
  }
  return body as T;
}

export class PlayClient {
  constructor(readonly baseUrl: string) {}

  createSession(config: SessionConfig = {}): Promise<{
    session_id: string;
    state: StateMessage;
  }> {
    return request(`${this.baseUrl}/sessions`, {
      method: "POST",
      body: JSON.stringify(config),
    });
  }

  getState(sid: string): Promise<StateMessage> {
    return request(`${this.baseUrl}/sessions/${sid}`);
  }

  submitAction(sid: string, frog: number, action: Action): Promise<ActionResponse> {
    return request(`${this.baseUrl}/sessions/${sid}/actions`, {
      method: "POST",
      body: JSON.stringify({ frog, action }),
    });
  }

  reset(sid: string, seed?: number): Promise<StateMessage> {
    return request(`${this.baseUrl}/sessions/${sid}/reset`, {
      method: "POST",
      body: JSON.stringify(seed === undefined ? {} : { seed }),
    });
  }

  advance(sid: string): Promise<StateMessage> {
    return request(`${this.baseUrl}/sessions/${sid}/advance`, { method: "POST" });
  }

  hint(sid: string, frog: number): Promise<HintResponse> {
    return request(`${this.baseUrl}/sessions/${sid}/hint?frog=${frog}`);
  }

  /** Open the live channel; every pushed StateMessage goes to onMessage.
   * Reconnects with backoff until closed via the returned function. */
  subscribe(
    sid: string,
    onMessage: (msg: StateMessage) => void,
    onStatus?: (connected: boolean) => void,
  ): () => void {
    const wsUrl = this.baseUrl.replace(/^http/, "ws") + `/sessions/${sid}/ws`;
    let closed = false;
    let retryMs = 500;

    const open = () => {
      if (closed) return;
      const ws = new WebSocket(wsUrl);
      ws.onopen = () => {
        retryMs = 500;
        onStatus?.(true);
      };
      ws.onmessage = (ev) => onMessage(JSON.parse(ev.data) as StateMessage);
      ws.onclose = () => {
        onStatus?.(false);
        if (!closed) {
          setTimeout(open, retryMs);
          retryMs = Math.min(retryMs * 2, 10_000);
        }
      };
    };
    open();
    return () => {
      closed = true;
    };
  }
}
