"""Independent reference implementations used to cross-check the library.

Everything here is written from the definitions, deliberately in a
different style from the main code (full-matrix edit distance, its own
conformance regexes, per-sentence BLEU accumulation), so agreement is
meaningful.
"""

from __future__ import annotations

import math
import re
from collections import Counter


# --- edit distance / fuzzy match ---------------------------------------------

def edit_distance(a: str, b: str) -> int:
    rows, cols = len(a) + 1, len(b) + 1
    table = [[0] * cols for _ in range(rows)]
    for i in range(rows):
        table[i][0] = i
    for j in range(cols):
        table[0][j] = j
    for i in range(1, rows):
        for j in range(1, cols):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            table[i][j] = min(
                table[i - 1][j] + 1,
                table[i][j - 1] + 1,
                table[i - 1][j - 1] + cost,
            )
    return table[-1][-1]


def ref_values_match(a: str, b: str) -> bool:
    longest = max(len(a), len(b))
    if longest == 0:
        return True
    return 1.0 - edit_distance(a, b) / longest >= 0.85


# --- slot conformance ---------------------------------------------------------

_REF_MONTH = (
    "(?:january|february|march|april|may|june|july|august|september|october|"
    "november|december|jan|feb|mar|apr|jun|jul|aug|sep|sept|oct|nov|dec)"
)
_REF_DAY = r"\d{1,2}(?:st|nd|rd|th)?"
_REF_DATE_RES = [
    re.compile(r"^\d{4}-\d{1,2}-\d{1,2}$"),
    re.compile(r"^\d{1,2}/\d{1,2}$"),
    re.compile(r"^\d{1,2}/\d{1,2}/\d{4}$"),
    re.compile(rf"^{_REF_MONTH}(?: {_REF_DAY})?(?:,? \d{{4}})?$"),
    re.compile(rf"^{_REF_DAY} (?:of )?{_REF_MONTH}(?:,? \d{{4}})?$"),
]
_REF_TIME_RE = re.compile(r"^(\d{1,2})(:(\d{2}))?( ?(am|pm))?$")


def ref_conforms(kind: str, allowed, value: str) -> bool:
    if value == "":
        return False
    if kind == "free-text":
        return True
    if kind == "integer":
        return re.match(r"^[+-]?\d+$", value) is not None
    if kind == "boolean":
        return value in ("true", "false", "yes", "no")
    if kind == "categorical":
        for candidate in allowed or []:
            if ref_values_match(value, candidate):
                return True
        return False
    if kind == "date":
        return any(rx.match(value) for rx in _REF_DATE_RES)
    if kind == "time":
        m = _REF_TIME_RE.match(value)
        if m is None:
            return False
        hour = int(m.group(1))
        if m.group(3) is not None and int(m.group(3)) > 59:
            return False
        if m.group(5) is not None:
            return 1 <= hour <= 12
        return hour <= 23
    raise ValueError(kind)


# --- brute-force error classification -----------------------------------------

def ref_breakdown(pred_pairs, gold_pairs, slots) -> dict:
    """Counts + reward straight from the definitions.

    pred_pairs/gold_pairs: ordered (key, value) lists, canonical strings.
    slots: list of (name, kind, allowed_values_or_None).
    """
    slot_table = {name: (kind, allowed) for name, kind, allowed in slots}
    gold = dict(gold_pairs)
    assert all(k in slot_table for k in gold), "gold references unknown slot"

    counts = {"nk": 0, "mk": 0, "sv": 0, "hv": 0}
    for key, value in pred_pairs:
        if key not in slot_table:
            counts["nk"] += 1
        elif key in gold and ref_values_match(value, gold[key]):
            pass
        elif ref_conforms(slot_table[key][0], slot_table[key][1], value):
            counts["sv"] += 1
        else:
            counts["hv"] += 1
    predicted_keys = [k for k, _ in pred_pairs]
    counts["mk"] = sum(1 for k in gold if k not in predicted_keys)

    n_error = counts["nk"] + counts["mk"] + counts["sv"] + counts["hv"]
    n_total = 2 * len(gold)
    if n_total == 0:
        reward = 1.0 if n_error == 0 else -1.0
    else:
        reward = 1.0 - 2.0 * n_error / n_total
        if reward > 1.0:
            reward = 1.0
        if reward < -1.0:
            reward = -1.0
    return {
        "n_nk": counts["nk"],
        "n_mk": counts["mk"],
        "n_sv": counts["sv"],
        "n_hv": counts["hv"],
        "n_total": n_total,
        "n_error": n_error,
        "reward": reward,
    }


# --- reference corpus BLEU ------------------------------------------------------

def _grams(tokens, n):
    return [tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]


def ref_corpus_bleu(hyp_token_lists, ref_token_lists) -> float:
    """Corpus BLEU, 4-gram uniform weights, brevity penalty, add-one
    smoothing on orders 2-4 (numerator and denominator)."""
    assert len(hyp_token_lists) == len(ref_token_lists)
    clipped = {1: 0, 2: 0, 3: 0, 4: 0}
    produced = {1: 0, 2: 0, 3: 0, 4: 0}
    hyp_total = sum(len(h) for h in hyp_token_lists)
    ref_total = sum(len(r) for r in ref_token_lists)
    for hyp, ref in zip(hyp_token_lists, ref_token_lists):
        for n in (1, 2, 3, 4):
            hyp_grams = _grams(hyp, n)
            ref_counter = Counter(_grams(ref, n))
            produced[n] += len(hyp_grams)
            used: Counter = Counter()
            for gram in hyp_grams:
                if used[gram] < ref_counter.get(gram, 0):
                    clipped[n] += 1
                    used[gram] += 1
    if clipped[1] == 0 or produced[1] == 0:
        return 0.0
    precisions = [clipped[1] / produced[1]]
    for n in (2, 3, 4):
        precisions.append((clipped[n] + 1) / (produced[n] + 1))
    geo_mean = math.exp(sum(math.log(p) for p in precisions) / 4.0)
    if hyp_total >= ref_total:
        bp = 1.0
    else:
        bp = math.exp(1.0 - ref_total / hyp_total)
    return bp * geo_mean
