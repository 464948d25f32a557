import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { render, renderEvidenceText } from "../src/render.js";
import { Session } from "../src/state.js";
import { fakeFetch, makeTask } from "./helpers.js";

async function renderedSession(tasks = [makeTask()]) {
  const { fetch } = fakeFetch((url) =>
    url.includes("/annotation/tasks")
      ? { status: 200, body: { annotator: "beta", tasks } }
      : { status: 200, body: { status: "ok" } },
  );
  const session = new Session(new ApiClient("http://x", { annotator: "beta" }, fetch));
  await session.load();
  const root = document.createElement("div");
  render(document, root, session);
  return { session, root };
}

describe("renderEvidenceText", () => {
  it("replaces [IMG_k] with inline lazy images", () => {
    const node = renderEvidenceText(document, "before [IMG_1] after", ["aW1n"]);
    const img = node.querySelector("img");
    expect(img).not.toBeNull();
    expect(img?.getAttribute("loading")).toBe("lazy");
    expect(img?.src).toContain("aW1n");
    expect(node.textContent).toBe("before  after");
  });

  it("keeps out-of-range placeholders as text", () => {
    const node = renderEvidenceText(document, "see [IMG_2]", ["aW1n"]);
    expect(node.querySelector("img")).toBeNull();
    expect(node.textContent).toBe("see [IMG_2]");
  });
});

describe("task rendering", () => {
  it("shows claim, both evidence panels, guidelines and progress", async () => {
    const { root } = await renderedSession();
    expect(root.querySelector(".claim-panel")?.textContent).toContain("Valencia");
    expect(root.querySelector(".predicted-evidence")).not.toBeNull();
    expect(root.querySelector(".reference-evidence")).not.toBeNull();
    expect(root.querySelector(".guidelines")).not.toBeNull();
    expect(root.querySelector(".progress")?.textContent).toBe("Task 1 of 1");
  });

  it("badges reference images that duplicate a claim image", async () => {
    const { root } = await renderedSession();
    expect(root.querySelector(".badge")?.textContent).toBe("claim image");
  });

  it("never shows team identity or automatic score", async () => {
    const { root } = await renderedSession();
    const text = root.innerHTML.toLowerCase();
    expect(text).not.toContain("team");
    expect(text).not.toContain("score");
  });

  it("disables submit until both ratings are chosen", async () => {
    const { session, root } = await renderedSession();
    const button = () =>
      root.querySelector(".submit-button") as HTMLButtonElement;
    expect(button().disabled).toBe(true);
    session.setCoverage(3);
    render(document, root, session);
    expect(button().disabled).toBe(true);
    session.setRelevance(2);
    render(document, root, session);
    expect(button().disabled).toBe(false);
  });

  it("renders twelve rubric-labelled steps", async () => {
    const { root } = await renderedSession();
    expect(root.querySelectorAll(".rating-step")).toHaveLength(12);
    expect(root.querySelector(".rating-coverage")?.textContent).toContain(
      "All reference evidence is fully covered",
    );
  });

  it("shows the completion screen when done", async () => {
    const { root } = await renderedSession([makeTask({ rated: true })]);
    expect(root.querySelector(".completion")).not.toBeNull();
  });

  it("shows a retry banner on error", async () => {
    const { fetch } = fakeFetch(() => ({ status: 503, body: {} }));
    const session = new Session(new ApiClient("http://x", { annotator: "b" }, fetch));
    await session.load();
    const root = document.createElement("div");
    render(document, root, session);
    expect(root.querySelector(".retry-banner")).not.toBeNull();
    expect(root.querySelector(".retry-button")).not.toBeNull();
  });

  it("renders rated tasks read-only", async () => {
    const { session, root } = await renderedSession([
      makeTask({ task_id: "t1" }),
      makeTask({ task_id: "t2" }),
    ]);
    session.setCoverage(4);
    session.setRelevance(4);
    await session.submit();
    session.goTo(0);
    render(document, root, session);
    expect(root.querySelector(".readonly-note")).not.toBeNull();
    expect(root.querySelector(".submit-button")).toBeNull();
    const checked = root.querySelectorAll("input:checked");
    expect(checked).toHaveLength(2);
    for (const input of root.querySelectorAll("input")) {
      expect((input as HTMLInputElement).disabled).toBe(true);
    }
  });
});
