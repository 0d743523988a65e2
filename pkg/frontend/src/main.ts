/** Entry point: create a session, subscribe to pushes, wire keyboard input.
 * Mode and server URL come from query parameters:
 *   ?mode=hotseat|human-vs-agent|agent-demo&server=http://localhost:7777
 */

import { mapKey } from "./input.js";
import { PlayClient } from "./net.js";
import { BoardRenderer } from "./render.js";
import { Store } from "./store.js";
import { Mode } from "./types.js";

async function boot(): Promise<void> {
  const params = new URLSearchParams(location.search);
  const mode = (params.get("mode") ?? "hotseat") as Mode;
  const server = params.get("server") ?? "http://localhost:7777";

  const root = document.getElementById("app")!;
  const renderer = new BoardRenderer(root);
  const store = new Store();
  const client = new PlayClient(server);

  store.subscribe((vm) => renderer.render(vm, store.waitingForPartner(), store.log));

  const { session_id, state } = await client.createSession({ mode });
  store.apply(state);
  client.subscribe(session_id, (msg) => store.apply(msg),
    (ok) => renderer.showConnection(ok));

  window.addEventListener("keydown", async (ev) => {
    if (ev.key === "r" || ev.key === "R") {
      store.apply(await client.reset(session_id));
      renderer.showHint(null);
      return;
    }
    if (ev.key === "h" || ev.key === "H") {
      if (store.current?.done) return;
      try {
        const hint = await client.hint(session_id, 0);
        renderer.showHint(hint.action_name);
      } catch {
        renderer.showHint(null); // no policy loaded server-side
      }
      return;
    }
    const intent = mapKey(ev.key, mode);
    if (intent === null || !store.canSubmit(intent.frog)) return;
    store.markSubmitted(intent.frog);
    try {
      const res = await client.submitAction(session_id, intent.frog, intent.action);
      store.apply(res.state);
      renderer.showHint(null);
    } catch {
      store.clearSubmitted(intent.frog); // server rejected; allow retry
    }
  });

  if (mode === "agent-demo") {
    const timer = setInterval(async () => {
      if (store.current?.done) {
        clearInterval(timer);
        return;
      }
      store.apply(await client.advance(session_id));
    }, 400);
  }
}

boot().catch((err) => {
  const root = document.getElementById("app")!;
  root.textContent = `failed to start: ${err}`;
});
