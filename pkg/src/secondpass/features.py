"""Hand-engineered per-position features for the sequence tagger."""

from __future__ import annotations

import re
from typing import Sequence

# single-letter amino-acid style variant (V599E) or HGVS-style prefixed token
_LETTER_DIGITS_LETTER = re.compile(r"^[A-Za-z]\d+[A-Za-z]$")
_HGVS_PREFIX = re.compile(r"^[cpg]\.")

_BEFORE = "<s>"
_AFTER = "</s>"


def word_shape(token: str) -> str:
    """Collapse the token to a run-compressed case/digit shape (V599E -> A0A)."""
    out: list[str] = []
    for ch in token:
        if ch.isupper():
            sym = "A"
        elif ch.islower():
            sym = "a"
        elif ch.isdigit():
            sym = "0"
        else:
            sym = ch
        if not out or out[-1] != sym:
            out.append(sym)
    return "".join(out)


def looks_like_mutation(token: str) -> bool:
    return bool(_LETTER_DIGITS_LETTER.match(token) or _HGVS_PREFIX.match(token))


def extract_features(tokens: Sequence[str], position: int) -> list[str]:
    """Deterministic feature strings for one token in context.

    Unknown tokens still produce shape, affix and window features, which is
    what lets the model generalize to unseen mutation nomenclature.
    """
    if not 0 <= position < len(tokens):
        raise IndexError(f"position {position} out of range for {len(tokens)} tokens")
    word = tokens[position]
    lower = word.lower()
    feats = ["bias", f"low={lower}", f"shape={word_shape(word)}"]
    for k in (1, 2, 3):
        if len(lower) >= k:
            feats.append(f"pre{k}={lower[:k]}")
            feats.append(f"suf{k}={lower[-k:]}")
    if any(ch.isdigit() for ch in word):
        feats.append("has_digit")
    if looks_like_mutation(word):
        feats.append("mutation_form")
    for offset in (-2, -1, 1, 2):
        j = position + offset
        if j < 0:
            context = _BEFORE
        elif j >= len(tokens):
            context = _AFTER
        else:
            context = tokens[j].lower()
        feats.append(f"w[{offset:+d}]={context}")
    return feats
