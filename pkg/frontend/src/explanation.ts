/**
 * View models for the "why is this sentence here" panel: an alignment
 * overlay for similarity rankings, a probability gauge for confidence
 * rankings, or nothing.
 */

import { QueueItem } from "./api.js";

export interface AlignmentOverlay {
  kind: "alignment";
  bestErrorId: string;
  errorTokens: string[];
  /** token index in the queued sentence -> token index in the error sentence */
  links: { from: number; to: number; evidence: string }[];
  score: number;
}

export interface ConfidenceGauge {
  kind: "confidence";
  confidence: number;
  /** 0 = most suspicious (rank 1), 1 = least suspicious */
  percentile: number;
}

export type ExplanationView = AlignmentOverlay | ConfidenceGauge | null;

export function explanationView(item: QueueItem, total: number): ExplanationView {
  const explanation = item.explanation;
  if (!explanation) return null;
  if (explanation.kind === "similarity" && explanation.best_error_id) {
    return {
      kind: "alignment",
      bestErrorId: explanation.best_error_id,
      errorTokens: explanation.error_tokens ?? [],
      links: (explanation.pairs ?? []).map(([from, to, evidence]) => ({ from, to, evidence })),
      score: explanation.alignment_score ?? explanation.score ?? 0,
    };
  }
  if (explanation.kind === "confidence") {
    return {
      kind: "confidence",
      confidence: explanation.confidence ?? item.confidence ?? 0,
      percentile: total > 1 ? (item.rank - 1) / (total - 1) : 0,
    };
  }
  return null;
}
