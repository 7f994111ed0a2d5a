/** Browser entry point: session id lives in the URL hash. */

import { ApiClient } from "./api.js";
import { App } from "./app.js";

const base = (window as { GRAPHY_API_BASE?: string }).GRAPHY_API_BASE ?? "/api/v1";
const api = new ApiClient(base, (url, init) => fetch(url, init));

const root = document.getElementById("app");
if (root === null) {
  throw new Error("missing #app element");
}

const params = new URLSearchParams(window.location.hash.slice(1));
const app = new App(root, api, {
  sessionId: params.get("s") ?? undefined,
  onSession: (id) => {
    window.location.hash = `s=${id}`;
  },
});
void app.start();
