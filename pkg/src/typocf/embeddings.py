"""Language embedding tables: the typed currency between components.

A table maps language ids to fixed-dimension real vectors. Tables come out
of the character-LM trainer (see charlm) or any external tool, travel as
TSV, and feed the factorization model's external modes and the k-NN
baseline.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import IntegrityError, ParseError


@dataclass(eq=False)
class LanguageEmbeddingTable:
    dim: int
    vectors: dict[str, np.ndarray]

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        for lid, vec in self.vectors.items():
            vec = np.asarray(vec, dtype=np.float64)
            if vec.shape != (self.dim,):
                raise IntegrityError(
                    f"vector for {lid!r} has shape {vec.shape}, expected ({self.dim},)"
                )
            if not np.all(np.isfinite(vec)):
                raise IntegrityError(f"vector for {lid!r} has non-finite entries")
            self.vectors[lid] = vec

    def language_ids(self) -> tuple[str, ...]:
        return tuple(self.vectors)

    def get(self, language_id: str) -> np.ndarray:
        return self.vectors[language_id]

    def covers(self, language_ids) -> bool:
        return all(lid in self.vectors for lid in language_ids)

    def equals(self, other: "LanguageEmbeddingTable") -> bool:
        if self.dim != other.dim or set(self.vectors) != set(other.vectors):
            return False
        return all(
            np.array_equal(vec, other.vectors[lid]) for lid, vec in self.vectors.items()
        )


def export_table(table: LanguageEmbeddingTable, path) -> None:
    """Write one 'language_id v1 .. vd' TSV row per language.

    Components are serialized with repr so import_table(export_table(t))
    reproduces t bit for bit.
    """
    lines = []
    for lid, vec in table.vectors.items():
        lines.append("\t".join([lid] + [repr(float(x)) for x in vec]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def import_table(path) -> LanguageEmbeddingTable:
    """Read and validate an embedding TSV; rejects ragged or duplicate rows."""
    vectors: dict[str, np.ndarray] = {}
    dim = None
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) < 2:
            raise ParseError(f"{path}:{lineno}: need a language id and >= 1 component")
        lid = parts[0]
        if lid in vectors:
            raise IntegrityError(f"{path}:{lineno}: duplicate language id {lid!r}")
        try:
            vec = np.array([float(x) for x in parts[1:]], dtype=np.float64)
        except ValueError:
            raise ParseError(f"{path}:{lineno}: non-numeric component") from None
        if dim is None:
            dim = vec.size
        elif vec.size != dim:
            raise ParseError(
                f"{path}:{lineno}: row has {vec.size} components, expected {dim}"
            )
        vectors[lid] = vec
    if not vectors:
        raise ParseError(f"{path}: no embedding rows")
    return LanguageEmbeddingTable(dim=dim, vectors=vectors)


def table_from_matrix(language_ids, matrix) -> LanguageEmbeddingTable:
    """Wrap a (n_languages, dim) array as a table, rows in id order."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != len(language_ids):
        raise ValueError("matrix shape does not match language_ids")
    return LanguageEmbeddingTable(
        dim=matrix.shape[1],
        vectors={lid: matrix[i].copy() for i, lid in enumerate(language_ids)},
    )
