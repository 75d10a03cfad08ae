"""Corpus-level evaluation: BLEU, fuzzy-match rate, char F1, error rates.

BLEU compares whitespace tokens of the sorted canonical serializations
(the only text both sides share), with uniform 4-gram weights, brevity
penalty, and add-one smoothing on orders 2-4. FM is the percentage of
gold slots whose value is fuzzy-matched by the prediction (0-100 scale).
F1 is micro-averaged character-multiset precision/recall over values
aligned by exact canonical key.
"""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import AlignmentError, EmptyCorpus
from .fuzzy import values_match
from .parsing import serialize_argument_map
from .scoring import ErrorBreakdown
from .schema import ArgumentMap

Pair = tuple[ArgumentMap, ArgumentMap]  # (pred, gold)


@dataclass(frozen=True)
class MetricsReport:
    bleu: float
    fm: float
    f1: float
    n_samples: int
    nk_rate: float
    mk_rate: float
    sv_rate: float
    hv_rate: float
    fm_strict: float


def _gold_slot_matches(pred: ArgumentMap, gold: ArgumentMap) -> tuple[int, int]:
    matched = 0
    for key, value in gold:
        pred_value = pred.get(key)
        if pred_value is not None and values_match(pred_value, value):
            matched += 1
    return matched, len(gold)


def fuzzy_match_rate(pairs: Sequence[Pair]) -> float:
    """Percentage of gold slots matched by the prediction, over the corpus."""
    if not pairs:
        raise EmptyCorpus("fuzzy_match_rate over zero pairs")
    matched = total = 0
    for pred, gold in pairs:
        m, t = _gold_slot_matches(pred, gold)
        matched += m
        total += t
    if total == 0:
        return 100.0
    return 100.0 * matched / total


def strict_match_rate(pairs: Sequence[Pair]) -> float:
    """Dialogue-level diagnostic: percentage of samples with every gold slot matched."""
    if not pairs:
        raise EmptyCorpus("strict_match_rate over zero pairs")
    hits = sum(1 for pred, gold in pairs if _gold_slot_matches(pred, gold)[0] == len(gold))
    return 100.0 * hits / len(pairs)


def _char_stats(pred: ArgumentMap, gold: ArgumentMap) -> tuple[int, int, int]:
    """(multiset overlap on aligned values, total pred chars, total gold chars)."""
    gold_values = gold.as_dict()
    overlap = 0
    for key, value in pred:
        if key in gold_values:
            inter = Counter(value) & Counter(gold_values[key])
            overlap += sum(inter.values())
    pred_chars = sum(len(v) for _, v in pred)
    gold_chars = sum(len(v) for _, v in gold)
    return overlap, pred_chars, gold_chars


def _f1_from_stats(overlap: int, pred_chars: int, gold_chars: int) -> float:
    precision = overlap / pred_chars if pred_chars else 0.0
    recall = overlap / gold_chars if gold_chars else 0.0
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def char_f1(pred: ArgumentMap, gold: ArgumentMap) -> float:
    """Character-multiset F1 for one pair; 0 when there is nothing to compare."""
    return _f1_from_stats(*_char_stats(pred, gold))


def corpus_char_f1(pairs: Sequence[Pair]) -> float:
    if not pairs:
        raise EmptyCorpus("corpus_char_f1 over zero pairs")
    overlap = pred_chars = gold_chars = 0
    for pred, gold in pairs:
        o, p, g = _char_stats(pred, gold)
        overlap += o
        pred_chars += p
        gold_chars += g
    return _f1_from_stats(overlap, pred_chars, gold_chars)


def _ngram_counts(tokens: Sequence[str], order: int) -> Counter:
    return Counter(tuple(tokens[i : i + order]) for i in range(len(tokens) - order + 1))


def corpus_bleu(pairs: Sequence[Pair]) -> float:
    """Corpus BLEU over sorted serializations; 0.0 when no unigram matches."""
    if not pairs:
        raise EmptyCorpus("corpus_bleu over zero pairs")
    matched = [0, 0, 0, 0]
    totals = [0, 0, 0, 0]
    hyp_len = ref_len = 0
    for pred, gold in pairs:
        hyp = serialize_argument_map(pred, "sorted").split()
        ref = serialize_argument_map(gold, "sorted").split()
        hyp_len += len(hyp)
        ref_len += len(ref)
        for order in range(1, 5):
            hyp_counts = _ngram_counts(hyp, order)
            ref_counts = _ngram_counts(ref, order)
            totals[order - 1] += sum(hyp_counts.values())
            matched[order - 1] += sum(
                min(count, ref_counts[gram]) for gram, count in hyp_counts.items()
            )
    if matched[0] == 0 or totals[0] == 0:
        return 0.0
    log_sum = 0.25 * math.log(matched[0] / totals[0])
    for order in range(2, 5):
        log_sum += 0.25 * math.log((matched[order - 1] + 1) / (totals[order - 1] + 1))
    brevity = 1.0 if hyp_len >= ref_len else math.exp(1.0 - ref_len / hyp_len)
    return brevity * math.exp(log_sum)


def evaluate_corpus(pairs: Sequence[Pair], breakdowns: Sequence[ErrorBreakdown]) -> MetricsReport:
    """Assemble the full report; error rates are summed counts / summed n_total."""
    if len(pairs) != len(breakdowns):
        raise AlignmentError(
            f"{len(pairs)} pairs vs {len(breakdowns)} breakdowns"
        )
    if not pairs:
        raise EmptyCorpus("evaluate_corpus over zero pairs")
    total = sum(b.n_total for b in breakdowns)
    if total > 0:
        rates = tuple(
            sum(getattr(b, name) for b in breakdowns) / total
            for name in ("n_nk", "n_mk", "n_sv", "n_hv")
        )
    else:
        rates = (0.0, 0.0, 0.0, 0.0)
    return MetricsReport(
        bleu=corpus_bleu(pairs),
        fm=fuzzy_match_rate(pairs),
        f1=corpus_char_f1(pairs),
        n_samples=len(pairs),
        nk_rate=rates[0],
        mk_rate=rates[1],
        sv_rate=rates[2],
        hv_rate=rates[3],
        fm_strict=strict_match_rate(pairs),
    )


METRICS_CSV_COLUMNS = (
    "dataset",
    "split",
    "backend",
    "bleu",
    "fm",
    "f1",
    "nk_rate",
    "mk_rate",
    "sv_rate",
    "hv_rate",
    "n_samples",
    "fm_strict",
)


def metrics_report_csv(report: MetricsReport, dataset: str, split: str, backend: str) -> str:
    """One-row CSV artifact for a report (header + data row)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRICS_CSV_COLUMNS)
    writer.writerow(
        [
            dataset,
            split,
            backend,
            report.bleu,
            report.fm,
            report.f1,
            report.nk_rate,
            report.mk_rate,
            report.sv_rate,
            report.hv_rate,
            report.n_samples,
            report.fm_strict,
        ]
    )
    return buf.getvalue()
