/** Entry point: create a session against the service and mount the views. */

import { ApiClient } from "./api.js";
import { createStore } from "./state.js";
import { mountApp } from "./views.js";
import type { App } from "./views.js";

export async function boot(root: HTMLElement, baseUrl = ""): Promise<App> {
  const api = new ApiClient(baseUrl);
  const store = await createStore(api);
  return mountApp(root, store);
}

declare global {
  interface Window {
    regiongen?: App;
  }
}

if (typeof document !== "undefined") {
  const root = document.getElementById("app");
  if (root) {
    // served under /ui by the API process, so same-origin calls just work
    void boot(root).then((app) => {
      window.regiongen = app;
    });
  }
}
