"""Binary encoding of a categorical KB for the factorization model.

Features with three or more values expand into a one-hot column group (one
column per value, in value-id order). Features with exactly two values
become a single column that is 1 for the larger value id and 0 for the
smaller; on unfiltered data the larger id is value 2. Unobserved pairs are
stored as 0 with the mask cleared, so 0-entries are only meaningful where
the mask is set.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import IntegrityError
from .kb import TypologicalKB

ONE_HOT = "one-hot"
SINGLE_BINARY = "single-binary"


@dataclass(frozen=True)
class ColumnGroup:
    """Columns encoding one feature.

    For one-hot groups, columns and value_ids run in parallel. For
    single-binary groups there is one column and value_ids holds the
    (smaller, larger) pair; the column encodes "equals the larger id".
    """

    feature_id: str
    kind: str
    columns: tuple[int, ...]
    value_ids: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class BinaryMatrix:
    """Dense 0/1 matrix with an observation mask over language rows."""

    language_ids: tuple[str, ...]
    groups: tuple[ColumnGroup, ...]
    entries: np.ndarray  # (L, C) float64 of 0.0/1.0
    mask: np.ndarray  # (L, C) bool
    column_labels: tuple[str, ...]
    column_value_names: tuple[str, ...]
    _lang_index: dict = field(init=False, repr=False)
    _group_by_feature: dict = field(init=False, repr=False)

    def __post_init__(self):
        n_lang = len(self.language_ids)
        n_col = len(self.column_labels)
        if self.entries.shape != (n_lang, n_col) or self.mask.shape != (n_lang, n_col):
            raise ValueError("entries/mask shape does not match ids and labels")
        object.__setattr__(
            self, "_lang_index", {lid: i for i, lid in enumerate(self.language_ids)}
        )
        object.__setattr__(
            self, "_group_by_feature", {g.feature_id: g for g in self.groups}
        )

    @property
    def n_languages(self) -> int:
        return len(self.language_ids)

    @property
    def n_columns(self) -> int:
        return len(self.column_labels)

    def language_index(self, language_id: str) -> int:
        return self._lang_index[language_id]

    def group(self, feature_id: str) -> ColumnGroup:
        return self._group_by_feature[feature_id]

    def feature_ids(self) -> tuple[str, ...]:
        return tuple(g.feature_id for g in self.groups)

    def is_observed(self, language_id: str, feature_id: str) -> bool:
        li = self._lang_index[language_id]
        return bool(self.mask[li, self._group_by_feature[feature_id].columns[0]])

    def observed_pairs(self) -> frozenset[tuple[str, str]]:
        pairs = set()
        for group in self.groups:
            col = group.columns[0]
            for li in np.flatnonzero(self.mask[:, col]):
                pairs.add((self.language_ids[li], group.feature_id))
        return frozenset(pairs)

    def cells_for_pairs(self, pairs) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Expand (language_id, feature_id) pairs into per-column cells.

        Returns parallel arrays (language row, column index, 0/1 target) in
        a deterministic order. Raises IntegrityError for pairs that are not
        observed in the matrix.
        """
        rows, cols, targets = [], [], []
        for lid, fid in sorted(pairs):
            li = self._lang_index.get(lid)
            group = self._group_by_feature.get(fid)
            if li is None or group is None:
                raise IntegrityError(f"pair ({lid!r}, {fid!r}) not in matrix")
            if not self.mask[li, group.columns[0]]:
                raise IntegrityError(f"pair ({lid!r}, {fid!r}) is unobserved")
            for col in group.columns:
                rows.append(li)
                cols.append(col)
                targets.append(self.entries[li, col])
        return (
            np.asarray(rows, dtype=np.int64),
            np.asarray(cols, dtype=np.int64),
            np.asarray(targets, dtype=np.float64),
        )


def binarize(kb: TypologicalKB) -> BinaryMatrix:
    """Encode a KB as a masked binary matrix; deterministic per KB."""
    groups = []
    labels: list[str] = []
    value_names: list[str] = []
    next_col = 0
    for feat in kb.features:
        vids = feat.value_ids()
        if len(vids) < 2:
            raise IntegrityError(
                f"feature {feat.id!r} has {len(vids)} value(s); binarization "
                f"needs at least 2 (filter the KB first)"
            )
        if len(vids) >= 3:
            columns = tuple(range(next_col, next_col + len(vids)))
            groups.append(ColumnGroup(feat.id, ONE_HOT, columns, vids))
            for vid in vids:
                labels.append(f"{feat.id}:{vid}")
                value_names.append(feat.value_name(vid))
            next_col += len(vids)
        else:
            lo, hi = vids
            groups.append(ColumnGroup(feat.id, SINGLE_BINARY, (next_col,), (lo, hi)))
            labels.append(f"{feat.id}:{hi}")
            value_names.append(feat.value_name(hi))
            next_col += 1

    lang_index = {lang.id: i for i, lang in enumerate(kb.languages)}
    entries = np.zeros((len(kb.languages), next_col), dtype=np.float64)
    mask = np.zeros_like(entries, dtype=bool)
    group_by_feature = {g.feature_id: g for g in groups}
    for lid, fid, vid in kb.cells:
        li = lang_index[lid]
        group = group_by_feature[fid]
        mask[li, list(group.columns)] = True
        if group.kind == ONE_HOT:
            col = group.columns[group.value_ids.index(vid)]
            entries[li, col] = 1.0
        else:
            entries[li, group.columns[0]] = 1.0 if vid == group.value_ids[1] else 0.0
    return BinaryMatrix(
        language_ids=tuple(lang.id for lang in kb.languages),
        groups=tuple(groups),
        entries=entries,
        mask=mask,
        column_labels=tuple(labels),
        column_value_names=tuple(value_names),
    )


def column_of(matrix: BinaryMatrix, feature_id: str, value_id: int) -> int:
    """Column index encoding (feature, value); raises KeyError when unknown.

    For a single-binary group both inventory values map to the same column.
    """
    try:
        group = matrix.group(feature_id)
    except KeyError:
        raise KeyError(f"unknown feature {feature_id!r}") from None
    if value_id not in group.value_ids:
        raise KeyError(f"feature {feature_id!r} has no value {value_id}")
    if group.kind == SINGLE_BINARY:
        return group.columns[0]
    return group.columns[group.value_ids.index(value_id)]


def binary_matrix_from_dense(
    language_ids, feature_ids, entries, mask
) -> BinaryMatrix:
    """Build a matrix of single-binary features from dense arrays.

    Convenience for synthetic experiments and gradient checks where each
    column stands alone; value ids are (1, 2) per feature.
    """
    entries = np.asarray(entries, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    groups = tuple(
        ColumnGroup(fid, SINGLE_BINARY, (i,), (1, 2))
        for i, fid in enumerate(feature_ids)
    )
    return BinaryMatrix(
        language_ids=tuple(language_ids),
        groups=groups,
        entries=entries,
        mask=mask,
        column_labels=tuple(f"{fid}:2" for fid in feature_ids),
        column_value_names=tuple("" for _ in feature_ids),
    )


def dump_matrix(matrix: BinaryMatrix, path) -> None:
    """Write a human-auditable TSV; unobserved entries print as '?'."""
    lines = ["\t".join(("language_id",) + matrix.column_labels)]
    for li, lid in enumerate(matrix.language_ids):
        row = [lid]
        for ci in range(matrix.n_columns):
            row.append(str(int(matrix.entries[li, ci])) if matrix.mask[li, ci] else "?")
        lines.append("\t".join(row))
    from pathlib import Path

    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
