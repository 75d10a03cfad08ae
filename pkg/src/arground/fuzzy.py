"""Normalized Levenshtein similarity for fuzzy value comparison.

The 0.85 threshold is tuned so a single-character typo in a word of
length >= 7 still matches while short substitutions ("3pm" vs "noon")
do not.
"""

from __future__ import annotations

MATCH_THRESHOLD = 0.85


def levenshtein(a: str, b: str) -> int:
    """Edit distance with unit insert/delete/substitute costs."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def similarity(a: str, b: str) -> float:
    """1 - dist/max(len); 1.0 for two empty strings."""
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(a, b) / longest


def values_match(pred: str, gold: str, threshold: float = MATCH_THRESHOLD) -> bool:
    """Symmetric fuzzy equality on canonicalized strings."""
    return similarity(pred, gold) >= threshold
