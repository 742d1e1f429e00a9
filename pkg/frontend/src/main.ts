// Entry point: wire the API client, the polling store, and the renderer.
// Configuration is a single API base URL (?api=... or same origin).

import { ApiClient } from "./api.js";
import { Poller } from "./poller.js";
import { renderBoard } from "./render.js";
import { DashboardStore } from "./store.js";

const POLL_INTERVAL_MS = 2_000;

function bootstrap(): void {
  const params = new URLSearchParams(window.location.search);
  const baseUrl = params.get("api") ?? "";
  const root = document.getElementById("board");
  if (!root) throw new Error("missing #board element");

  const store = new DashboardStore(new ApiClient(baseUrl), POLL_INTERVAL_MS);
  const poller = new Poller(async () => {
    await store.poll(Date.now());
    const banner = store.isStale(Date.now())
      ? "Data is stale — last refresh failed; showing the previous snapshot."
      : null;
    renderBoard(root, store, banner);
  }, POLL_INTERVAL_MS);
  poller.start();
}

bootstrap();
