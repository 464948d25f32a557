/** DOM rendering for the annotation session. Blind by construction: the
 * payload carries no team identity or automatic score, and nothing here
 * invents one.
 */

import { PredictedEvidence, ReferenceEvidence, TaskView } from "./api.js";
import { Session } from "./state.js";

export const COVERAGE_RUBRIC: Record<number, string> = {
  0: "No reference evidence is covered at all",
  1: "A small fragment of the reference evidence is covered",
  2: "Some reference evidence is covered, most is missing",
  3: "About half of the reference evidence is covered",
  4: "Most reference evidence is covered, minor gaps remain",
  5: "All reference evidence is fully covered",
};

export const RELEVANCE_RUBRIC: Record<number, string> = {
  0: "Entirely unrelated to verifying the claim",
  1: "Barely related; would not help a fact-checker",
  2: "Loosely related, mostly unhelpful",
  3: "Somewhat useful for verifying the claim",
  4: "Useful and on-topic with minor noise",
  5: "Directly and completely useful for verification",
};

const IMG_TOKEN = /\[IMG_([1-9][0-9]*)\]/g;

function el(
  doc: Document,
  tag: string,
  className: string,
  text?: string,
): HTMLElement {
  const node = doc.createElement(tag);
  node.className = className;
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

function lazyImage(doc: Document, b64: string, alt: string): HTMLImageElement {
  const img = doc.createElement("img") as HTMLImageElement;
  img.src = `data:image/*;base64,${b64}`;
  img.alt = alt;
  img.loading = "lazy";
  return img;
}

/** Evidence text with [IMG_k] placeholders replaced by inline images.
 * This is exactly the post-normalization content the scorer sees. */
export function renderEvidenceText(
  doc: Document,
  text: string,
  images: string[],
): HTMLElement {
  const container = el(doc, "span", "evidence-text");
  let last = 0;
  for (const match of text.matchAll(IMG_TOKEN)) {
    const start = match.index ?? 0;
    if (start > last) {
      container.appendChild(doc.createTextNode(text.slice(last, start)));
    }
    const idx = parseInt(match[1], 10) - 1;
    if (idx >= 0 && idx < images.length) {
      container.appendChild(lazyImage(doc, images[idx], `evidence image ${idx + 1}`));
    } else {
      container.appendChild(doc.createTextNode(match[0]));
    }
    last = start + match[0].length;
  }
  if (last < text.length) {
    container.appendChild(doc.createTextNode(text.slice(last)));
  }
  return container;
}

function renderPredicted(doc: Document, items: PredictedEvidence[]): HTMLElement {
  const panel = el(doc, "section", "predicted-evidence");
  panel.appendChild(el(doc, "h2", "", "Predicted evidence"));
  for (const item of items) {
    const row = el(doc, "div", "evidence-item");
    row.appendChild(renderEvidenceText(doc, item.text, item.images));
    row.appendChild(el(doc, "div", "evidence-url", item.url));
    panel.appendChild(row);
  }
  return panel;
}

function renderReference(doc: Document, items: ReferenceEvidence[]): HTMLElement {
  const panel = el(doc, "section", "reference-evidence");
  panel.appendChild(el(doc, "h2", "", "Reference evidence"));
  for (const item of items) {
    const row = el(doc, "div", "evidence-item");
    row.appendChild(
      renderEvidenceText(doc, item.text, item.images.map((i) => i.b64)),
    );
    for (const image of item.images) {
      if (image.claim_image) {
        row.appendChild(el(doc, "span", "badge", "claim image"));
      }
    }
    row.appendChild(el(doc, "div", "evidence-url", item.url));
    panel.appendChild(row);
  }
  return panel;
}

function renderClaim(doc: Document, task: TaskView): HTMLElement {
  const panel = el(doc, "section", "claim-panel");
  panel.appendChild(el(doc, "h2", "", "Claim"));
  panel.appendChild(el(doc, "p", "claim-text", task.claim.text));
  for (const b64 of task.claim.images) {
    panel.appendChild(lazyImage(doc, b64, "claim image"));
  }
  const meta = el(doc, "dl", "claim-meta");
  const pairs: Array<[string, string]> = [];
  if (task.claim.date) {
    pairs.push(["Date", task.claim.date]);
  }
  if (task.claim.location) {
    pairs.push(["Location", task.claim.location]);
  }
  for (const [key, value] of Object.entries(task.claim.metadata)) {
    pairs.push([key, value]);
  }
  for (const [key, value] of pairs) {
    meta.appendChild(el(doc, "dt", "", key));
    meta.appendChild(el(doc, "dd", "", value));
  }
  panel.appendChild(meta);
  return panel;
}

function renderRatingGroup(
  doc: Document,
  session: Session,
  name: "coverage" | "relevance",
  rubric: Record<number, string>,
  readOnly: boolean,
): HTMLElement {
  const group = el(doc, "fieldset", `rating rating-${name}`);
  group.appendChild(el(doc, "legend", "", name));
  const selected = name === "coverage" ? session.coverage : session.relevance;
  for (let value = 0; value <= 5; value++) {
    const label = el(doc, "label", "rating-step");
    const input = doc.createElement("input") as HTMLInputElement;
    input.type = "radio";
    input.name = name;
    input.value = String(value);
    input.checked = selected === value;
    input.disabled = readOnly;
    input.addEventListener("change", () => {
      if (name === "coverage") {
        session.setCoverage(value);
      } else {
        session.setRelevance(value);
      }
    });
    label.appendChild(input);
    label.appendChild(el(doc, "span", "rubric", `${value}: ${rubric[value]}`));
    group.appendChild(label);
  }
  return group;
}

function renderGuidelines(doc: Document): HTMLElement {
  const panel = el(doc, "aside", "guidelines");
  panel.appendChild(el(doc, "h2", "", "Guidelines"));
  panel.appendChild(
    el(
      doc,
      "p",
      "",
      "Rate how fully the predicted evidence covers the reference evidence" +
        " (coverage) and how useful it is for verifying the claim" +
        " (relevance). Rate only what is shown; the origin of the" +
        " prediction is intentionally hidden.",
    ),
  );
  return panel;
}

export function render(doc: Document, root: HTMLElement, session: Session): void {
  root.replaceChildren();

  if (session.phase === "loading") {
    root.appendChild(el(doc, "p", "loading", "Loading tasks..."));
    return;
  }
  if (session.phase === "error") {
    const banner = el(doc, "div", "retry-banner");
    banner.appendChild(el(doc, "p", "", `Network problem: ${session.errorMessage}`));
    const button = el(doc, "button", "retry-button", "Retry");
    button.addEventListener("click", () => void session.retry());
    banner.appendChild(button);
    root.appendChild(banner);
    return;
  }
  if (session.phase === "done") {
    const doneScreen = el(doc, "div", "completion");
    doneScreen.appendChild(el(doc, "h1", "", "All tasks complete"));
    doneScreen.appendChild(
      el(doc, "p", "", `You rated ${session.progress.total} samples. Thank you!`),
    );
    root.appendChild(doneScreen);
    return;
  }

  const task = session.current;
  if (task === null) {
    return;
  }
  const readOnly = session.phase === "review";
  const { done, total } = session.progress;
  root.appendChild(el(doc, "div", "progress", `Task ${done + 1} of ${total}`));
  root.appendChild(renderClaim(doc, task));
  root.appendChild(renderPredicted(doc, task.predicted_evidence));
  root.appendChild(renderReference(doc, task.reference_evidence));
  root.appendChild(renderGuidelines(doc));
  root.appendChild(renderRatingGroup(doc, session, "coverage", COVERAGE_RUBRIC, readOnly));
  root.appendChild(renderRatingGroup(doc, session, "relevance", RELEVANCE_RUBRIC, readOnly));

  if (session.fieldError) {
    root.appendChild(el(doc, "p", "field-error", session.fieldError));
  }

  if (readOnly) {
    root.appendChild(el(doc, "p", "readonly-note", "Already rated (read-only)"));
    const back = el(doc, "button", "resume-button", "Back to open tasks");
    back.addEventListener("click", () => session.resume());
    root.appendChild(back);
  } else {
    const submit = el(doc, "button", "submit-button", "Submit rating") as HTMLButtonElement;
    submit.disabled = !session.canSubmit;
    submit.addEventListener("click", () => void session.submit());
    root.appendChild(submit);
  }
}
