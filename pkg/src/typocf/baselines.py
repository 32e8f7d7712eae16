"""Reference predictors the factorization model must beat.

FrequencyBaseline answers every query for a feature with the value most
often seen in training. NearestNeighborBaseline copies the value from the
closest training language in an embedding table (cosine distance).
"""

from __future__ import annotations

from collections import Counter

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .embeddings import LanguageEmbeddingTable
from .errors import NoPredictionError


def _as_pairs(train_pairs):
    if hasattr(train_pairs, "train_pairs"):
        return train_pairs.train_pairs
    return train_pairs


class FrequencyBaseline(BaseEstimator):
    """Per-feature modal value over the training cells.

    Ties pick the smaller value id; a feature never seen in training
    raises NoPredictionError, which the harness scores as wrong.
    """

    def fit(self, kb, train_pairs):
        counts: dict[str, Counter] = {}
        for lid, fid in _as_pairs(train_pairs):
            value = kb.value_of(lid, fid)
            if value is None:
                raise NoPredictionError(f"train pair ({lid!r}, {fid!r}) is unobserved")
            counts.setdefault(fid, Counter())[value] += 1
        self.modal_ = {}
        self.counts_ = counts
        for fid, counter in counts.items():
            # max count first, then the smaller value id
            self.modal_[fid] = min(counter, key=lambda v: (-counter[v], v))
        return self

    def predict(self, language_id: str, feature_id: str) -> int:
        if not hasattr(self, "modal_"):
            raise NotFittedError("call fit() first")
        if feature_id not in self.modal_:
            raise NoPredictionError(f"feature {feature_id!r} unseen in training")
        return self.modal_[feature_id]


class NearestNeighborBaseline(BaseEstimator):
    """k-nearest-neighbour value transfer over language embeddings.

    Distance is cosine (1 - cosine similarity); a zero-norm vector is
    defined to have similarity 0 with everything. Neighbour order breaks
    distance ties by language id, and the value vote breaks count ties by
    the smaller value id. The reference setup uses a single neighbour.
    """

    def __init__(self, k: int = 1):
        self.k = k

    def fit(self, table: LanguageEmbeddingTable, kb, train_pairs):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        self.table_ = table
        by_feature: dict[str, list[tuple[str, int]]] = {}
        for lid, fid in _as_pairs(train_pairs):
            value = kb.value_of(lid, fid)
            if value is None:
                raise NoPredictionError(f"train pair ({lid!r}, {fid!r}) is unobserved")
            if lid not in table.vectors:
                raise NoPredictionError(f"training language {lid!r} not in table")
            by_feature.setdefault(fid, []).append((lid, value))
        self.by_feature_ = {fid: sorted(rows) for fid, rows in by_feature.items()}
        return self

    @staticmethod
    def _cosine_distance(a: np.ndarray, b: np.ndarray) -> float:
        na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
        if na == 0.0 or nb == 0.0:
            return 1.0
        return 1.0 - float(np.dot(a, b)) / (na * nb)

    def predict(self, language_id: str, feature_id: str) -> int:
        if not hasattr(self, "by_feature_"):
            raise NotFittedError("call fit() first")
        if language_id not in self.table_.vectors:
            raise NoPredictionError(f"language {language_id!r} not in embedding table")
        candidates = self.by_feature_.get(feature_id)
        if not candidates:
            raise NoPredictionError(f"no training language has feature {feature_id!r}")
        query = self.table_.get(language_id)
        ranked = sorted(
            candidates,
            key=lambda row: (self._cosine_distance(query, self.table_.get(row[0])), row[0]),
        )
        votes = Counter(value for _, value in ranked[: self.k])
        return min(votes, key=lambda v: (-votes[v], v))
