/** Retrain button state: start a job, poll until it settles, keep the score. */

import { NerResult, TriageApi } from "./api.js";

export interface RetrainState {
  phase: "idle" | "running" | "done" | "failed";
  jobId: string | null;
  result: NerResult | null;
  error: string | null;
}

export class RetrainPanel {
  private state: RetrainState = { phase: "idle", jobId: null, result: null, error: null };
  private listeners: ((state: RetrainState) => void)[] = [];

  constructor(
    private readonly api: TriageApi,
    private readonly pollIntervalMs = 500,
  ) {}

  get current(): RetrainState {
    return this.state;
  }

  subscribe(listener: (state: RetrainState) => void): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private update(partial: Partial<RetrainState>): void {
    this.state = { ...this.state, ...partial };
    for (const listener of this.listeners) listener(this.state);
  }

  /** Start a retrain job and poll to completion. Resolves with the final state. */
  async run(force = false): Promise<RetrainState> {
    if (this.state.phase === "running") return this.state;
    this.update({ phase: "running", result: null, error: null });
    try {
      const { job_id } = await this.api.retrain(force);
      this.update({ jobId: job_id });
      for (;;) {
        const job = await this.api.getJob(job_id);
        if (job.status === "done") {
          this.update({ phase: "done", result: job.result });
          return this.state;
        }
        if (job.status === "failed") {
          this.update({ phase: "failed", error: job.error ?? "retrain failed" });
          return this.state;
        }
        await sleep(this.pollIntervalMs);
      }
    } catch (err) {
      this.update({ phase: "failed", error: err instanceof Error ? err.message : String(err) });
      return this.state;
    }
  }
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
