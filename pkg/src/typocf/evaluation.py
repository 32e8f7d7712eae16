"""Decoding predicted probabilities back to values and scoring them.

All scoring happens in the original categorical value space: one-hot
groups decode by argmax over their columns (ties to the smaller value id),
single-binary columns decode by thresholding at 0.5 (exactly 0.5 falls to
the smaller id). Under that decoding every gold cell gets exactly one
predicted value, which makes micro-averaged F1 coincide with accuracy;
the score op computes both independently so the identity stays checkable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .binarize import ONE_HOT, BinaryMatrix


@dataclass(frozen=True)
class EvalReport:
    micro_f1: float
    accuracy: float
    per_area_accuracy: dict[str, float]
    per_macroarea_f1: dict[str, float]
    n_eval_cells: int


def decode_argmax(probs, matrix: BinaryMatrix, language_id: str, feature_id: str) -> int:
    """Original value id predicted for one (language, feature) pair.

    probs is either a dense (n_languages, n_columns) array or a callable
    (lang_row, column) -> probability.
    """
    li = matrix.language_index(language_id)
    group = matrix.group(feature_id)
    if callable(probs):
        col_probs = [float(probs(li, ci)) for ci in group.columns]
    else:
        col_probs = [float(probs[li, ci]) for ci in group.columns]
    if group.kind == ONE_HOT:
        best = 0
        for i in range(1, len(col_probs)):
            if col_probs[i] > col_probs[best]:  # strict: ties keep smaller value id
                best = i
        return group.value_ids[best]
    lo, hi = group.value_ids
    return hi if col_probs[0] > 0.5 else lo


def _micro_f1(outcomes) -> float:
    """outcomes: iterable of (gold_hit, predicted_anything) booleans."""
    tp = fp = fn = 0
    for hit, predicted in outcomes:
        if hit:
            tp += 1
        elif predicted:
            fp += 1
            fn += 1
        else:
            fn += 1
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2.0 * precision * recall / (precision + recall)


def score(predictions: dict, gold: dict, kb) -> EvalReport:
    """Score predicted value ids against gold cells.

    predictions and gold map (language_id, feature_id) -> value_id. Gold
    pairs without a prediction count as wrong. Extra predicted pairs are
    ignored. Raises ValueError on an empty gold set.
    """
    if not gold:
        raise ValueError("gold set is empty; nothing to score")
    outcomes = {}
    for pair, gold_value in gold.items():
        pred = predictions.get(pair)
        outcomes[pair] = (pred == gold_value, pred is not None)

    n = len(gold)
    accuracy = sum(1 for hit, _ in outcomes.values() if hit) / n
    micro = _micro_f1(outcomes.values())

    area_of = {feat.id: feat.area for feat in kb.features}
    macro_of = {lang.id: lang.macroarea for lang in kb.languages}
    per_area: dict[str, list] = {}
    per_macro: dict[str, list] = {}
    for (lid, fid), outcome in outcomes.items():
        per_area.setdefault(area_of.get(fid, "unknown"), []).append(outcome)
        per_macro.setdefault(macro_of.get(lid, "unknown"), []).append(outcome)

    per_area_accuracy = {
        area: sum(1 for hit, _ in rows if hit) / len(rows)
        for area, rows in sorted(per_area.items())
    }
    per_macroarea_f1 = {
        macro: _micro_f1(rows) for macro, rows in sorted(per_macro.items())
    }
    return EvalReport(
        micro_f1=micro,
        accuracy=accuracy,
        per_area_accuracy=per_area_accuracy,
        per_macroarea_f1=per_macroarea_f1,
        n_eval_cells=n,
    )


def aggregate_ci(scores, confidence: float = 0.95) -> tuple[float, float]:
    """Mean and Student-t half-width over repeated run scores.

    Uses n-1 degrees of freedom; a single score has half-width 0. The
    half-width is returned unclipped; reporting code clips the interval
    endpoints to [0, 1].
    """
    values = np.asarray(list(scores), dtype=np.float64)
    if values.size == 0:
        raise ValueError("aggregate_ci needs at least one score")
    if not (0.0 < confidence < 1.0):
        raise ValueError(f"confidence must be in (0, 1), got {confidence}")
    mean = float(np.mean(values))
    if values.size == 1:
        return mean, 0.0
    sem = float(np.std(values, ddof=1)) / float(np.sqrt(values.size))
    t_mult = float(stats.t.ppf(0.5 + confidence / 2.0, values.size - 1))
    return mean, sem * t_mult


def report_to_tsv(report: EvalReport) -> str:
    """Flat two-line record: header and one row; breakdowns are packed."""

    def pack(mapping):
        return ",".join(f"{key}={value:.6f}" for key, value in mapping.items())

    header = "\t".join(
        ("micro_f1", "accuracy", "n_eval_cells", "per_area_accuracy", "per_macroarea_f1")
    )
    row = "\t".join(
        (
            f"{report.micro_f1:.6f}",
            f"{report.accuracy:.6f}",
            str(report.n_eval_cells),
            pack(report.per_area_accuracy),
            pack(report.per_macroarea_f1),
        )
    )
    return header + "\n" + row + "\n"
