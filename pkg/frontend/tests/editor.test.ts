import { describe, expect, it } from "vitest";

import { SpanEditor } from "../src/editor.js";
import { submissionPlan } from "../src/queue.js";

describe("SpanEditor", () => {
  it("click-drag over tokens 1-2 with type Mutation yields B/I", () => {
    const editor = new SpanEditor(4, ["O", "O", "O", "O"]);
    editor.beginSelect(1);
    editor.extendSelect(2);
    expect(editor.commitSelection("Mutation")).toBe(true);
    expect(editor.tags).toEqual(["O", "B-Mutation", "I-Mutation", "O"]);
  });

  it("reverse drag normalizes the span", () => {
    const editor = new SpanEditor(5);
    editor.beginSelect(3);
    editor.extendSelect(1);
    editor.commitSelection("Gene");
    expect(editor.tags).toEqual(["O", "B-Gene", "I-Gene", "I-Gene", "O"]);
  });

  it("deleting the only span leaves all O", () => {
    const editor = new SpanEditor(3, ["B-Mutation", "I-Mutation", "O"]);
    expect(editor.deleteSpanAt(1)).toBe(true);
    expect(editor.tags).toEqual(["O", "O", "O"]);
  });

  it("rejects overlapping span edits in-editor", () => {
    const editor = new SpanEditor(4, ["B-Mutation", "I-Mutation", "O", "O"]);
    editor.beginSelect(1);
    editor.extendSelect(2);
    expect(editor.commitSelection("Gene")).toBe(false);
    expect(editor.tags).toEqual(["B-Mutation", "I-Mutation", "O", "O"]);
  });

  it("rejects commит without selection or type", () => {
    const editor = new SpanEditor(3);
    expect(editor.commitSelection("Mutation")).toBe(false);
    editor.beginSelect(0);
    expect(editor.commitSelection("")).toBe(false);
  });

  it("initializes from existing tags incl. repair", () => {
    const editor = new SpanEditor(3, ["O", "I-Mutation", "O"]);
    expect(editor.currentSpans).toEqual([{ start: 1, end: 1, entityType: "Mutation" }]);
  });

  it("keeps indices in range when the pointer leaves the row", () => {
    const editor = new SpanEditor(3);
    editor.beginSelect(-5);
    editor.extendSelect(99);
    editor.commitSelection("Mutation");
    expect(editor.tags).toEqual(["B-Mutation", "I-Mutation", "I-Mutation"]);
  });
});

describe("submissionPlan", () => {
  it("asks for confirmation when nothing changed", () => {
    expect(submissionPlan(["O", "O"], ["O", "O"], false)).toEqual({
      action: "needs_confirmation",
    });
    expect(submissionPlan(["O", "O"], ["O", "O"], true)).toEqual({ action: "submit" });
  });

  it("submits directly when the tags changed", () => {
    expect(submissionPlan(["O", "O"], ["B-Mutation", "O"], false)).toEqual({ action: "submit" });
  });
});
