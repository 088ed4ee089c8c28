/**
 * Span editor state machine: click-drag token selection, type assignment,
 * span deletion. The pending tag sequence is always derived from the span
 * list, so the editor cannot emit an invalid BIO sequence or change the
 * sentence length.
 */

import { Span, spansOverlap, spansToTags, tagsToSpans } from "./bio.js";

export interface Selection {
  anchor: number;
  focus: number;
}

export class SpanEditor {
  readonly length: number;
  private spans: Span[];
  private selection: Selection | null = null;

  constructor(length: number, initialTags?: string[]) {
    if (length < 1) throw new Error("editor needs at least one token");
    if (initialTags && initialTags.length !== length) {
      throw new Error(`expected ${length} tags, got ${initialTags.length}`);
    }
    this.length = length;
    this.spans = initialTags ? tagsToSpans(initialTags) : [];
  }

  get currentSpans(): Span[] {
    return this.spans.map((s) => ({ ...s }));
  }

  get currentSelection(): Selection | null {
    return this.selection ? { ...this.selection } : null;
  }

  /** Tags derived from the span list; valid BIO by construction. */
  get tags(): string[] {
    return spansToTags(this.spans, this.length);
  }

  private clamp(index: number): number {
    return Math.max(0, Math.min(this.length - 1, Math.floor(index)));
  }

  beginSelect(index: number): void {
    const i = this.clamp(index);
    this.selection = { anchor: i, focus: i };
  }

  extendSelect(index: number): void {
    if (!this.selection) {
      this.beginSelect(index);
      return;
    }
    this.selection = { ...this.selection, focus: this.clamp(index) };
  }

  clearSelection(): void {
    this.selection = null;
  }

  /**
   * Turn the active selection into a span of the given type. Rejected (and
   * the span list left untouched) when there is no selection, the type is
   * empty, or the selection overlaps an existing span.
   */
  commitSelection(entityType: string): boolean {
    if (!this.selection || !entityType) return false;
    const start = Math.min(this.selection.anchor, this.selection.focus);
    const end = Math.max(this.selection.anchor, this.selection.focus);
    const candidate: Span = { start, end, entityType };
    if (this.spans.some((existing) => spansOverlap(existing, candidate))) {
      return false;
    }
    this.spans.push(candidate);
    this.spans.sort((a, b) => a.start - b.start);
    this.selection = null;
    return true;
  }

  /** Delete the span covering the given token, if any. */
  deleteSpanAt(index: number): boolean {
    const i = this.clamp(index);
    const before = this.spans.length;
    this.spans = this.spans.filter((s) => !(s.start <= i && i <= s.end));
    return this.spans.length < before;
  }

  reset(tags: string[]): void {
    if (tags.length !== this.length) {
      throw new Error(`expected ${this.length} tags, got ${tags.length}`);
    }
    this.spans = tagsToSpans(tags);
    this.selection = null;
  }
}
