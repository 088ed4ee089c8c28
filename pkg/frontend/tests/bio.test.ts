import { describe, expect, it } from "vitest";

import { isValidBio, spansToTags, tagsToSpans } from "../src/bio.js";
import { SpanEditor } from "../src/editor.js";

describe("tagsToSpans", () => {
  it("decodes a basic run", () => {
    expect(tagsToSpans(["B-Mutation", "I-Mutation", "O"])).toEqual([
      { start: 0, end: 1, entityType: "Mutation" },
    ]);
  });

  it("adjacent B starts a new span", () => {
    expect(tagsToSpans(["O", "B-Mutation", "B-Mutation"])).toEqual([
      { start: 1, end: 1, entityType: "Mutation" },
      { start: 2, end: 2, entityType: "Mutation" },
    ]);
  });

  it("repairs orphan I like the service does", () => {
    expect(tagsToSpans(["O", "I-Mutation"])).toEqual([
      { start: 1, end: 1, entityType: "Mutation" },
    ]);
    expect(tagsToSpans(["I-Gene", "I-Mutation"])).toEqual([
      { start: 0, end: 0, entityType: "Gene" },
      { start: 1, end: 1, entityType: "Mutation" },
    ]);
  });
});

describe("spansToTags", () => {
  it("derives BIO from spans", () => {
    const tags = spansToTags([{ start: 1, end: 2, entityType: "Mutation" }], 4);
    expect(tags).toEqual(["O", "B-Mutation", "I-Mutation", "O"]);
    expect(isValidBio(tags)).toBe(true);
  });

  it("rejects overlap and out-of-bounds", () => {
    expect(() =>
      spansToTags(
        [
          { start: 0, end: 1, entityType: "A" },
          { start: 1, end: 2, entityType: "B" },
        ],
        4,
      ),
    ).toThrow(/overlap/);
    expect(() => spansToTags([{ start: 2, end: 5, entityType: "A" }], 4)).toThrow(/bounds/);
  });

  it("round-trips through tagsToSpans", () => {
    const spans = [
      { start: 0, end: 0, entityType: "Gene" },
      { start: 2, end: 4, entityType: "Mutation" },
    ];
    expect(tagsToSpans(spansToTags(spans, 6))).toEqual(spans);
  });
});

describe("isValidBio", () => {
  it("accepts well-formed sequences", () => {
    expect(isValidBio(["O", "B-Mutation", "I-Mutation"])).toBe(true);
  });
  it("rejects bad grammar and orphan I", () => {
    expect(isValidBio(["B-"])).toBe(false);
    expect(isValidBio(["Z-Mutation"])).toBe(false);
    expect(isValidBio(["O", "I-Mutation"])).toBe(false);
    expect(isValidBio(["B-Gene", "I-Mutation"])).toBe(false);
  });
});

/** Deterministic PRNG so the fuzz is reproducible. */
function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

describe("span editor property: scripted edits never emit invalid BIO", () => {
  const TYPES = ["Mutation", "Gene", "Locus"];

  it("holds over 300 random edit scripts", () => {
    for (let script = 0; script < 300; script++) {
      const rand = mulberry32(script + 1);
      const length = 1 + Math.floor(rand() * 14);
      const editor = new SpanEditor(length);
      const ops = 1 + Math.floor(rand() * 25);
      for (let op = 0; op < ops; op++) {
        const choice = rand();
        const index = Math.floor(rand() * length);
        if (choice < 0.3) {
          editor.beginSelect(index);
        } else if (choice < 0.55) {
          editor.extendSelect(Math.floor(rand() * length));
        } else if (choice < 0.8) {
          const type = TYPES[Math.floor(rand() * TYPES.length)]!;
          editor.commitSelection(type);
        } else if (choice < 0.95) {
          editor.deleteSpanAt(index);
        } else {
          editor.clearSelection();
        }
        const tags = editor.tags;
        expect(tags).toHaveLength(length);
        expect(isValidBio(tags)).toBe(true);
      }
      // spans stay sorted and disjoint throughout
      const spans = editor.currentSpans;
      for (let i = 1; i < spans.length; i++) {
        expect(spans[i]!.start).toBeGreaterThan(spans[i - 1]!.end);
      }
    }
  });
});
