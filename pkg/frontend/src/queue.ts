/**
 * Queue view state: one page of ranked items plus progress counters.
 *
 * Mutations go through the service and the affected item is replaced with
 * the server's response, so after any submit-then-refetch the local state
 * equals the server state; the optimistic badge flip only bridges the
 * round trip.
 */

import { ApiError, QueueCounters, QueueItem, TriageApi } from "./api.js";

export interface QueueState {
  items: QueueItem[];
  total: number;
  offset: number;
  limit: number;
  counters: QueueCounters;
  loading: boolean;
  error: string | null;
}

export type Listener = (state: QueueState) => void;

export class QueueStore {
  private state: QueueState = {
    items: [],
    total: 0,
    offset: 0,
    limit: 25,
    counters: { pending: 0, adjudicated: 0, skipped: 0 },
    loading: false,
    error: null,
  };
  private listeners: Listener[] = [];

  constructor(private readonly api: TriageApi) {}

  get current(): QueueState {
    return this.state;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private update(partial: Partial<QueueState>): void {
    this.state = { ...this.state, ...partial };
    for (const listener of this.listeners) listener(this.state);
  }

  async load(offset = this.state.offset, limit = this.state.limit): Promise<void> {
    this.update({ loading: true, error: null });
    try {
      const page = await this.api.getQueue(offset, limit);
      this.update({
        items: page.items,
        total: page.total,
        offset: page.offset,
        limit: page.limit,
        counters: page.counters,
        loading: false,
      });
    } catch (err) {
      this.update({ loading: false, error: describe(err) });
    }
  }

  /** Refetch the current page (used on window focus to drop stale data). */
  reload(): Promise<void> {
    return this.load();
  }

  async nextPage(): Promise<void> {
    if (this.state.offset + this.state.limit < this.state.total) {
      await this.load(this.state.offset + this.state.limit);
    }
  }

  async previousPage(): Promise<void> {
    await this.load(Math.max(0, this.state.offset - this.state.limit));
  }

  private replaceItem(item: QueueItem): void {
    this.update({
      items: this.state.items.map((existing) => (existing.id === item.id ? item : existing)),
    });
  }

  private flipBadge(id: string, status: QueueItem["status"]): QueueItem[] {
    const before = this.state.items;
    this.update({
      items: before.map((item) => (item.id === id ? { ...item, status } : item)),
    });
    return before;
  }

  /**
   * Submit an adjudication. The badge flips optimistically and is
   * reconciled with (or reverted to) the server response; the returned
   * error string is meant for inline display next to the editor.
   */
  async adjudicate(id: string, tags: string[]): Promise<{ ok: boolean; error: string | null }> {
    const before = this.flipBadge(id, "adjudicated");
    try {
      const item = await this.api.adjudicate(id, tags);
      this.replaceItem(item);
      await this.refreshCounters();
      return { ok: true, error: null };
    } catch (err) {
      this.update({ items: before });
      return { ok: false, error: describe(err) };
    }
  }

  async skip(id: string): Promise<{ ok: boolean; error: string | null }> {
    const before = this.flipBadge(id, "skipped");
    try {
      const item = await this.api.skip(id);
      this.replaceItem(item);
      await this.refreshCounters();
      return { ok: true, error: null };
    } catch (err) {
      this.update({ items: before });
      return { ok: false, error: describe(err) };
    }
  }

  private async refreshCounters(): Promise<void> {
    try {
      const page = await this.api.getQueue(this.state.offset, this.state.limit);
      this.update({ counters: page.counters, total: page.total, items: page.items });
    } catch {
      // keep the optimistic state; the next load() reconciles
    }
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return `${err.status}: ${err.message}`;
  if (err instanceof Error) return err.message;
  return String(err);
}

/**
 * Submission guard: posting an unchanged pre-adjudicated sequence is legal
 * (the reviewer confirms the single annotation) but needs an explicit
 * confirmation first.
 */
export function submissionPlan(
  preTags: string[] | null,
  derivedTags: string[],
  confirmedUnchanged: boolean,
): { action: "submit" | "needs_confirmation" } {
  const unchanged =
    preTags !== null &&
    preTags.length === derivedTags.length &&
    preTags.every((tag, i) => tag === derivedTags[i]);
  if (unchanged && !confirmedUnchanged) return { action: "needs_confirmation" };
  return { action: "submit" };
}
