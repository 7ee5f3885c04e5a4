/** Bootstrap: wire the app to the page and keep the annotator id for the tab.
 *
 * The only client-side persistence is the per-tab session entry holding the
 * annotator id, so each browser tab is one annotator session.
 */

import { ApiClient } from "./api.js";
import { App } from "./app.js";

const SESSION_KEY = "annotator";

function boot(): void {
  const root = document.getElementById("app");
  if (root === null) throw new Error("missing #app container");
  const app = new App(root, {
    api: new ApiClient(),
    annotator: window.sessionStorage.getItem(SESSION_KEY) ?? undefined,
    onLogin: (name) => window.sessionStorage.setItem(SESSION_KEY, name),
    onLogout: () => window.sessionStorage.removeItem(SESSION_KEY),
  });
  void app.start();
}

if (document.readyState === "loading") {
  document.addEventListener("DOMContentLoaded", boot);
} else {
  boot();
}
