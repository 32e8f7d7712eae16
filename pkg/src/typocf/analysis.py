"""Descriptive analyses: binary column correlations and value distributions.

Correlations are Pearson (equivalently the phi coefficient on 0/1 data)
over pairwise-complete observations: each pair of columns is compared on
exactly the languages where both are observed. Pairs with fewer than two
common observations or a constant column are reported as missing, which is
deliberately distinct from a correlation of 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .binarize import BinaryMatrix
from .kb import TypologicalKB


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    labels: tuple[str, ...]
    values: np.ndarray  # (k, k), NaN where undefined

    def get(self, label_a: str, label_b: str) -> float:
        ia = self.labels.index(label_a)
        ib = self.labels.index(label_b)
        return float(self.values[ia, ib])


def correlations(matrix: BinaryMatrix, column_labels) -> CorrelationMatrix:
    """Pairwise-complete Pearson correlations between selected columns."""
    label_index = {label: i for i, label in enumerate(matrix.column_labels)}
    cols = []
    for label in column_labels:
        if label not in label_index:
            raise KeyError(f"unknown column label {label!r}")
        cols.append(label_index[label])
    k = len(cols)
    out = np.full((k, k), np.nan)
    for a in range(k):
        for b in range(a, k):
            ca, cb = cols[a], cols[b]
            common = matrix.mask[:, ca] & matrix.mask[:, cb]
            if int(common.sum()) < 2:
                continue
            x = matrix.entries[common, ca]
            y = matrix.entries[common, cb]
            sx, sy = float(np.std(x)), float(np.std(y))
            if sx == 0.0 or sy == 0.0:
                continue
            if a == b:
                out[a, a] = 1.0
                continue
            r = float(np.mean((x - x.mean()) * (y - y.mean())) / (sx * sy))
            out[a, b] = out[b, a] = r
    return CorrelationMatrix(labels=tuple(column_labels), values=out)


def export_correlations(corr: CorrelationMatrix, path) -> None:
    """Square TSV with row/column labels; missing entries print as NA."""
    lines = ["\t".join(("",) + corr.labels)]
    for i, label in enumerate(corr.labels):
        row = [label]
        for j in range(len(corr.labels)):
            value = corr.values[i, j]
            row.append("NA" if np.isnan(value) else f"{value:.6f}")
        lines.append("\t".join(row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def value_distributions(
    kb: TypologicalKB, genus: str | None = None, family: str | None = None
) -> list[tuple[str, int, int, float]]:
    """Per-feature value counts and shares inside one branch or family.

    Returns (feature_id, value_id, count, share) rows sorted by feature and
    value; shares sum to 1 per feature. Exactly the languages matching the
    given genus (and/or family) contribute; selecting nothing is an error.
    """
    if genus is None and family is None:
        raise ValueError("give a genus or a family to filter by")
    selected = {
        lang.id
        for lang in kb.languages
        if (genus is None or lang.genus == genus)
        and (family is None or lang.family == family)
    }
    if not selected:
        raise ValueError(
            f"no languages match genus={genus!r} family={family!r}"
        )
    counts: dict[str, dict[int, int]] = {}
    for lid, fid, vid in kb.cells:
        if lid in selected:
            counts.setdefault(fid, {}).setdefault(vid, 0)
            counts[fid][vid] += 1
    rows = []
    for fid in sorted(counts):
        total = sum(counts[fid].values())
        for vid in sorted(counts[fid]):
            count = counts[fid][vid]
            rows.append((fid, vid, count, count / total))
    return rows


def export_distributions(rows, path) -> None:
    lines = ["\t".join(("feature_id", "value_id", "count", "share"))]
    for fid, vid, count, share in rows:
        lines.append("\t".join((fid, str(vid), str(count), repr(share))))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
