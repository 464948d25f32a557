import { ApiClient } from "./api.js";
import { render } from "./render.js";
import { Session } from "./state.js";

function auth(): { token?: string; annotator?: string } {
  const params = new URLSearchParams(window.location.search);
  const token = params.get("token") ?? undefined;
  const annotator = params.get("annotator") ?? undefined;
  return { token, annotator };
}

export async function start(doc: Document, root: HTMLElement): Promise<void> {
  const api = new ApiClient(window.location.origin, auth());
  const session = new Session(api);

  // full re-render on every transition; the session is small enough that
  // diffing would be overkill
  session.onUpdate = () => render(doc, root, session);
  await session.load();
}

declare global {
  interface Window {
    __averimatecStarted?: boolean;
  }
}

if (typeof document !== "undefined" && !window.__averimatecStarted) {
  window.__averimatecStarted = true;
  const root = document.getElementById("app");
  if (root) {
    void start(document, root);
  }
}
