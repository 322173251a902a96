"""Deterministic tokenization and the overlap metrics built on it.

ROUGE-1 F1 serves as a lexical baseline; ROUGE-L precision drives the
abstractiveness measure (1 - ROUGE-L precision of the summary against the
source). The tokenizer is intentionally dependency-free so results are
bit-reproducible everywhere.
"""

from __future__ import annotations

import unicodedata
from collections import Counter
from typing import Sequence

from . import _kernels

TokenSequence = list[str]


def _strip_punctuation(token: str) -> str:
    start = 0
    end = len(token)
    while start < end and unicodedata.category(token[start]).startswith("P"):
        start += 1
    while end > start and unicodedata.category(token[end - 1]).startswith("P"):
        end -= 1
    return token[start:end]


def tokenize(text: str) -> TokenSequence:
    """Lowercase, split on whitespace, strip edge punctuation, drop empties."""
    out = []
    for raw in text.lower().split():
        tok = _strip_punctuation(raw)
        if tok:
            out.append(tok)
    return out


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    """Longest common subsequence length over token sequences."""
    ids: dict[str, int] = {}
    a_ids = [ids.setdefault(t, len(ids)) for t in a]
    b_ids = [ids.setdefault(t, len(ids)) for t in b]
    return _kernels.lcs_length(a_ids, b_ids)


def rouge1_f1(candidate: Sequence[str], reference: Sequence[str]) -> float:
    """Unigram-overlap F1 with clipped counts; 0 when either side is empty."""
    if not candidate or not reference:
        return 0.0
    cand_counts = Counter(candidate)
    ref_counts = Counter(reference)
    overlap = sum((cand_counts & ref_counts).values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(candidate)
    recall = overlap / len(reference)
    return 2.0 * precision * recall / (precision + recall)


def rougeL_precision(candidate: Sequence[str], reference: Sequence[str]) -> float:
    """LCS(candidate, reference) / len(candidate)."""
    if not candidate:
        raise ValueError("candidate token sequence is empty")
    return lcs_length(candidate, reference) / len(candidate)


def abstractiveness(summary: str, source: str) -> float:
    """1 - ROUGE-L precision of the summary against the source; in [0, 1].

    0 means the summary is copied verbatim (as a subsequence) from the
    source; 1 means no token of the summary appears in the source.
    """
    summary_tokens = tokenize(summary)
    if not summary_tokens:
        raise ValueError("summary has no tokens")
    return 1.0 - rougeL_precision(summary_tokens, tokenize(source))
