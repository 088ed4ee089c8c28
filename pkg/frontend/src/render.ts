/** DOM rendering: queue list, token editor, explanation panel, retrain bar. */

import { QueueItem } from "./api.js";
import { tagsToSpans } from "./bio.js";
import { SpanEditor } from "./editor.js";
import { ExplanationView } from "./explanation.js";
import { QueueState } from "./queue.js";
import { RetrainState } from "./retrain.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderCounters(counters: QueueState["counters"], total: number): HTMLElement {
  const bar = el("div", "counters");
  bar.append(
    el("span", "counter pending", `${counters.pending} pending`),
    el("span", "counter adjudicated", `${counters.adjudicated} adjudicated`),
    el("span", "counter skipped", `${counters.skipped} skipped`),
    el("span", "counter total", `${total} total`),
  );
  return bar;
}

export function renderQueue(
  state: QueueState,
  onOpen: (id: string) => void,
): HTMLElement {
  const list = el("div", "queue");
  if (state.error) {
    const error = el("div", "error-state");
    error.append(el("span", undefined, `Connection failed: ${state.error} `));
    const retry = el("button", "retry", "Retry");
    retry.dataset.action = "retry";
    error.append(retry);
    list.append(error);
    return list;
  }
  if (!state.items.length && !state.loading) {
    list.append(el("div", "empty-state", "Queue is empty — nothing to review."));
    return list;
  }
  for (const item of state.items) {
    const row = el("div", `row status-${item.status}`);
    row.dataset.id = item.id;
    row.append(
      el("span", "rank", `#${item.rank}`),
      el("span", "score", item.score.toFixed(4)),
      el("span", "snippet", item.tokens.slice(0, 12).join(" ")),
      el("span", `badge ${item.status}`, item.status),
    );
    row.addEventListener("click", () => onOpen(item.id));
    list.append(row);
  }
  return list;
}

export interface EditorCallbacks {
  onSubmit: (tags: string[]) => void;
  onSkip: () => void;
}

export function renderEditor(
  item: QueueItem,
  editor: SpanEditor,
  callbacks: EditorCallbacks,
): HTMLElement {
  const panel = el("div", "editor");
  panel.append(el("h3", undefined, `${item.id} (rank #${item.rank}, ${item.status})`));

  const spanOf = (index: number) =>
    editor.currentSpans.find((s) => s.start <= index && index <= s.end);

  const tokens = el("div", "tokens");
  let dragging = false;
  item.tokens.forEach((text, i) => {
    const span = spanOf(i);
    const predictionSpans = item.prediction_tags ? tagsToSpans(item.prediction_tags) : [];
    const predicted = predictionSpans.some((s) => s.start <= i && i <= s.end);
    const token = el(
      "span",
      "token" + (span ? " in-span" : "") + (predicted ? " predicted" : ""),
      text,
    );
    token.dataset.index = String(i);
    if (span && span.start === i) token.title = span.entityType;
    token.addEventListener("mousedown", () => {
      dragging = true;
      editor.beginSelect(i);
      refresh();
    });
    token.addEventListener("mouseenter", () => {
      if (dragging) {
        editor.extendSelect(i);
        refresh();
      }
    });
    token.addEventListener("mouseup", () => {
      dragging = false;
    });
    token.addEventListener("dblclick", () => {
      editor.deleteSpanAt(i);
      refresh();
    });
    const selection = editor.currentSelection;
    if (selection) {
      const lo = Math.min(selection.anchor, selection.focus);
      const hi = Math.max(selection.anchor, selection.focus);
      if (lo <= i && i <= hi) token.classList.add("selected");
    }
    tokens.append(token);
  });
  panel.append(tokens);

  const controls = el("div", "controls");
  const typeInput = el("input") as HTMLInputElement;
  typeInput.value = "Mutation";
  typeInput.placeholder = "entity type";
  const assign = el("button", undefined, "Assign type to selection");
  assign.addEventListener("click", () => {
    if (!editor.commitSelection(typeInput.value.trim())) {
      status.textContent = "Selection rejected (empty, no type, or overlaps a span).";
    } else {
      status.textContent = "";
    }
    refresh();
  });
  const submit = el("button", "primary", "Submit adjudication");
  submit.addEventListener("click", () => callbacks.onSubmit(editor.tags));
  const skip = el("button", undefined, "Skip");
  skip.addEventListener("click", callbacks.onSkip);
  const status = el("span", "inline-status");
  controls.append(typeInput, assign, submit, skip, status);
  panel.append(controls);

  const refresh = () => {
    const replacement = renderEditor(item, editor, callbacks);
    panel.replaceWith(replacement);
  };
  return panel;
}

export function renderExplanation(view: ExplanationView, tokens: string[]): HTMLElement {
  const panel = el("div", "explanation");
  if (!view) {
    panel.classList.add("hidden");
    return panel;
  }
  if (view.kind === "confidence") {
    panel.append(el("h4", undefined, "Why it is queued: low model confidence"));
    const gauge = el("div", "gauge");
    const fill = el("div", "gauge-fill");
    fill.style.width = `${Math.round(100 * view.confidence)}%`;
    gauge.append(fill);
    panel.append(
      gauge,
      el(
        "p",
        undefined,
        `Sequence probability ${view.confidence.toFixed(4)}; ` +
          `rank percentile ${(100 * view.percentile).toFixed(1)}%.`,
      ),
    );
    return panel;
  }
  panel.append(
    el("h4", undefined, `Why it is queued: similar to error sentence ${view.bestErrorId}`),
  );
  const ours = el("div", "aligned-sentence");
  const theirs = el("div", "aligned-sentence error-sentence");
  const linkedFrom = new Map(view.links.map((l) => [l.from, l] as const));
  const linkedTo = new Map(view.links.map((l) => [l.to, l] as const));
  tokens.forEach((text, i) => {
    const link = linkedFrom.get(i);
    const token = el("span", "token" + (link ? ` linked ${link.evidence}` : ""), text);
    if (link) token.dataset.link = String(link.to);
    ours.append(token);
  });
  view.errorTokens.forEach((text, j) => {
    const link = linkedTo.get(j);
    const token = el("span", "token" + (link ? ` linked ${link.evidence}` : ""), text);
    if (link) token.dataset.link = String(link.from);
    theirs.append(token);
  });
  panel.append(ours, theirs, el("p", undefined, `Alignment score ${view.score.toFixed(3)}.`));
  return panel;
}

export function renderRetrain(state: RetrainState, onRun: () => void): HTMLElement {
  const bar = el("div", "retrain");
  const button = el("button", "primary", state.phase === "running" ? "Retraining…" : "Retrain");
  button.disabled = state.phase === "running";
  button.addEventListener("click", onRun);
  bar.append(button);
  if (state.phase === "done" && state.result) {
    bar.append(
      el(
        "span",
        "retrain-result",
        `F-score ${(100 * state.result.f1).toFixed(1)} ` +
          `(P ${(100 * state.result.precision).toFixed(1)}, ` +
          `R ${(100 * state.result.recall).toFixed(1)})`,
      ),
    );
  } else if (state.phase === "failed" && state.error) {
    bar.append(el("span", "error", state.error));
  }
  return bar;
}
