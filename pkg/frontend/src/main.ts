/** App bootstrap: wire the stores to the DOM against a running service. */

import { TriageApi } from "./api.js";
import { SpanEditor } from "./editor.js";
import { explanationView } from "./explanation.js";
import { QueueStore, submissionPlan } from "./queue.js";
import { renderCounters, renderEditor, renderExplanation, renderQueue, renderRetrain } from "./render.js";
import { RetrainPanel } from "./retrain.js";

const params = new URLSearchParams(window.location.search);
const serviceUrl = params.get("service") ?? "http://127.0.0.1:8000";

const api = new TriageApi(serviceUrl);
const queue = new QueueStore(api);
const retrain = new RetrainPanel(api);

const root = document.getElementById("app")!;
const queueMount = document.createElement("div");
const detailMount = document.createElement("div");
const retrainMount = document.createElement("div");
root.append(retrainMount, queueMount, detailMount);

let openId: string | null = null;

async function openSentence(id: string): Promise<void> {
  openId = id;
  const item = await api.getSentence(id);
  const editor = new SpanEditor(item.tokens.length, item.submitted_tags ?? item.pre_tags ?? undefined);
  detailMount.replaceChildren(
    renderEditor(item, editor, {
      onSubmit: async (tags) => {
        const plan = submissionPlan(item.pre_tags, tags, false);
        if (plan.action === "needs_confirmation") {
          if (!window.confirm("No changes made — submit the single-annotator labels as adjudicated?")) {
            return;
          }
        }
        const outcome = await queue.adjudicate(id, tags);
        if (!outcome.ok && outcome.error) window.alert(outcome.error);
        else await openSentence(id);
      },
      onSkip: async () => {
        const outcome = await queue.skip(id);
        if (!outcome.ok && outcome.error) window.alert(outcome.error);
        else await openSentence(id);
      },
    }),
    renderExplanation(explanationView(item, queue.current.total), item.tokens),
  );
}

queue.subscribe((state) => {
  queueMount.replaceChildren(
    renderCounters(state.counters, state.total),
    renderQueue(state, (id) => void openSentence(id)),
  );
  const retryButton = queueMount.querySelector<HTMLButtonElement>("button[data-action=retry]");
  retryButton?.addEventListener("click", () => void queue.reload());
});

retrain.subscribe((state) => {
  retrainMount.replaceChildren(renderRetrain(state, () => void retrain.run(false)));
});

window.addEventListener("focus", () => {
  void queue.reload();
  if (openId) void openSentence(openId);
});

retrainMount.replaceChildren(renderRetrain(retrain.current, () => void retrain.run(false)));
void queue.load();
