/**
 * BIO tag sequences <-> mention spans.
 *
 * Mirrors the service's decoding rules: B-X starts a span, I-X continues a
 * same-type run, and an I-X that does not continue one (sentence start,
 * after O, or after a different type) is treated as a span start. Tags the
 * editor derives always come from a span list, so they are well formed by
 * construction.
 */

export interface Span {
  start: number;
  end: number; // inclusive
  entityType: string;
}

const TAG_RE = /^(O|[BI]-.+)$/;

export function isWellFormedTag(tag: string): boolean {
  return TAG_RE.test(tag);
}

/** Grammar check the service applies per tag, plus I-continuation strictness. */
export function isValidBio(tags: string[]): boolean {
  let runType: string | null = null;
  for (const tag of tags) {
    if (!isWellFormedTag(tag)) return false;
    if (tag === "O") {
      runType = null;
    } else {
      const kind = tag[0];
      const entityType = tag.slice(2);
      if (kind === "I" && runType !== entityType) return false;
      runType = entityType;
    }
  }
  return true;
}

export function tagsToSpans(tags: string[]): Span[] {
  const spans: Span[] = [];
  let start = -1;
  let runType: string | null = null;
  const close = (end: number) => {
    if (runType !== null) spans.push({ start, end, entityType: runType });
    start = -1;
    runType = null;
  };
  tags.forEach((tag, i) => {
    if (!isWellFormedTag(tag)) throw new Error(`bad tag ${tag}`);
    if (tag === "O") {
      close(i - 1);
    } else {
      const kind = tag[0];
      const entityType = tag.slice(2);
      if (kind === "B" || runType !== entityType) {
        close(i - 1);
        start = i;
        runType = entityType;
      }
    }
  });
  close(tags.length - 1);
  return spans;
}

/** Derive a tag sequence from non-overlapping spans; always valid BIO. */
export function spansToTags(spans: Span[], length: number): string[] {
  const tags = new Array<string>(length).fill("O");
  const sorted = [...spans].sort((a, b) => a.start - b.start);
  let previousEnd = -1;
  for (const span of sorted) {
    if (span.start < 0 || span.end >= length || span.start > span.end) {
      throw new Error(`span out of bounds: [${span.start}, ${span.end}]`);
    }
    if (span.start <= previousEnd) {
      throw new Error(`overlapping spans at token ${span.start}`);
    }
    if (!span.entityType) throw new Error("span needs an entity type");
    tags[span.start] = `B-${span.entityType}`;
    for (let i = span.start + 1; i <= span.end; i++) tags[i] = `I-${span.entityType}`;
    previousEnd = span.end;
  }
  return tags;
}

export function spansOverlap(a: Span, b: Span): boolean {
  return a.start <= b.end && b.start <= a.end;
}
