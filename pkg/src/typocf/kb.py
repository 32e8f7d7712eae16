"""Typological knowledge base: domain types, loaders, and filtering.

A knowledge base is a set of languages, a set of categorical features, and
at most one observed (language, feature, value) cell per language/feature
pair. Two on-disk representations are supported: the wide CSV export of a
WALS-style database (one row per language, one column per feature) and a
canonical long TSV format with explicit sections that round-trips exactly.
"""

from __future__ import annotations

import csv
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .errors import IntegrityError, ParseError

# Feature columns in wide exports look like "81A Order of Subject, Object and Verb".
_FEATURE_COL = re.compile(r"^(\d+[A-Z])\s+(.+)$")
# Observed cells look like "2 SVO"; the value name may itself contain spaces.
_CELL_VALUE = re.compile(r"^(\d+)(?:\s+(.*))?$")

_ID_COLUMNS = ("wals code", "wals_code", "id", "code")
_NAME_COLUMNS = ("name",)


@dataclass(frozen=True)
class Language:
    """One language with its genealogical and areal metadata.

    Unknown metadata is coded as the literal string "unknown"; fields are
    never empty after ingestion.
    """

    id: str
    name: str
    genus: str
    family: str
    macroarea: str


@dataclass(frozen=True)
class Feature:
    """One categorical feature with its ordered value inventory.

    values holds (value_id, value_name) pairs sorted by value_id. Value ids
    are positive and unique within the feature; after filtering they may
    have gaps (dropped values are never renumbered).
    """

    id: str
    name: str
    area: str
    values: tuple[tuple[int, str], ...]

    def value_ids(self) -> tuple[int, ...]:
        return tuple(v for v, _ in self.values)

    def value_name(self, value_id: int) -> str:
        for vid, vname in self.values:
            if vid == value_id:
                return vname
        raise KeyError(f"feature {self.id} has no value {value_id}")


@dataclass(frozen=True)
class TypologicalKB:
    """Immutable knowledge base; cells are (language_id, feature_id, value_id)."""

    languages: tuple[Language, ...]
    features: tuple[Feature, ...]
    cells: frozenset[tuple[str, str, int]]
    _lang_by_id: dict = field(init=False, repr=False, compare=False)
    _feat_by_id: dict = field(init=False, repr=False, compare=False)
    _value_by_pair: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        lang_by_id = {}
        for lang in self.languages:
            lang_by_id.setdefault(lang.id, lang)
        feat_by_id = {}
        for feat in self.features:
            feat_by_id.setdefault(feat.id, feat)
        value_by_pair = {}
        for lid, fid, vid in sorted(self.cells):
            value_by_pair.setdefault((lid, fid), vid)
        object.__setattr__(self, "_lang_by_id", lang_by_id)
        object.__setattr__(self, "_feat_by_id", feat_by_id)
        object.__setattr__(self, "_value_by_pair", value_by_pair)

    def language(self, language_id: str) -> Language:
        return self._lang_by_id[language_id]

    def feature(self, feature_id: str) -> Feature:
        return self._feat_by_id[feature_id]

    def language_ids(self) -> tuple[str, ...]:
        return tuple(lang.id for lang in self.languages)

    def feature_ids(self) -> tuple[str, ...]:
        return tuple(feat.id for feat in self.features)

    def value_of(self, language_id: str, feature_id: str) -> int | None:
        return self._value_by_pair.get((language_id, feature_id))

    def observed_pairs(self) -> frozenset[tuple[str, str]]:
        return frozenset(self._value_by_pair)

    def n_cells(self) -> int:
        return len(self.cells)


def validate_kb(kb: TypologicalKB) -> list[str]:
    """Exhaustive referential check; returns human-readable violations.

    Empty list means the KB satisfies its invariants. Used by tests and by
    the loaders' own error paths; deliberately never raises.
    """
    violations = []
    seen_langs = Counter(lang.id for lang in kb.languages)
    for lid, count in seen_langs.items():
        if count > 1:
            violations.append(f"duplicate language id {lid!r}")
    seen_feats = Counter(feat.id for feat in kb.features)
    for fid, count in seen_feats.items():
        if count > 1:
            violations.append(f"duplicate feature id {fid!r}")
    for lang in kb.languages:
        for attr in ("id", "name", "genus", "family", "macroarea"):
            if not getattr(lang, attr):
                violations.append(f"language {lang.id!r} has empty {attr}")
    for feat in kb.features:
        value_ids = feat.value_ids()
        if any(vid <= 0 for vid in value_ids):
            violations.append(f"feature {feat.id!r} has a non-positive value id")
        if list(value_ids) != sorted(set(value_ids)):
            violations.append(f"feature {feat.id!r} values not unique and sorted")
    lang_ids = {lang.id for lang in kb.languages}
    feat_values = {feat.id: set(feat.value_ids()) for feat in kb.features}
    pair_counts = Counter((lid, fid) for lid, fid, _ in kb.cells)
    for (lid, fid), count in pair_counts.items():
        if count > 1:
            violations.append(f"multiple cells for pair ({lid!r}, {fid!r})")
    for lid, fid, vid in sorted(kb.cells):
        if lid not in lang_ids:
            violations.append(f"cell references unknown language {lid!r}")
        elif fid not in feat_values:
            violations.append(f"cell references unknown feature {fid!r}")
        elif vid not in feat_values[fid]:
            violations.append(f"cell ({lid!r}, {fid!r}) references unknown value {vid}")
    return violations


def _normalize(value: str | None) -> str:
    value = (value or "").strip()
    return value if value else "unknown"


def load_feature_areas(path) -> dict[str, str]:
    """Read the two-column (feature_id, area) TSV mapping."""
    areas = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ParseError(f"{path}:{lineno}: expected 2 tab-separated fields")
        areas[parts[0].strip()] = _normalize(parts[1])
    return areas


def load_wals_wide(csv_path, area_map_path=None) -> TypologicalKB:
    """Load a wide WALS-style CSV export.

    Feature columns are recognized by their "<id> <name>" header; all other
    columns are language metadata. Cell syntax errors are reported with the
    offending language row and feature column. Features missing from the
    area map get area "unknown".
    """
    areas = load_feature_areas(area_map_path) if area_map_path else {}
    with open(csv_path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{csv_path}: empty file") from None
        rows = list(reader)

    id_col = None
    name_col = None
    feature_cols = []  # (column index, feature id, feature name)
    for idx, col in enumerate(header):
        match = _FEATURE_COL.match(col.strip())
        if match:
            feature_cols.append((idx, match.group(1), match.group(2).strip()))
            continue
        low = col.strip().lower()
        if id_col is None and low in _ID_COLUMNS:
            id_col = idx
        elif name_col is None and low in _NAME_COLUMNS:
            name_col = idx
    if id_col is None:
        raise ParseError(
            f"{csv_path}: no language id column (expected one of {_ID_COLUMNS})"
        )
    if not feature_cols:
        raise ParseError(f"{csv_path}: no feature columns matched '<id> <name>'")
    meta_cols = {}
    for idx, col in enumerate(header):
        meta_cols.setdefault(col.strip().lower(), idx)

    def meta(row, key):
        idx = meta_cols.get(key)
        return _normalize(row[idx]) if idx is not None and idx < len(row) else "unknown"

    languages = []
    seen = set()
    cells = set()
    value_names: dict[tuple[str, int], str] = {}
    for rowno, row in enumerate(rows, start=2):
        if not any(field.strip() for field in row):
            continue
        lid = row[id_col].strip() if id_col < len(row) else ""
        if not lid:
            raise ParseError(f"{csv_path}:{rowno}: empty language id")
        if lid in seen:
            raise IntegrityError(f"{csv_path}:{rowno}: duplicate language id {lid!r}")
        seen.add(lid)
        name = row[name_col].strip() if name_col is not None and name_col < len(row) else ""
        languages.append(
            Language(
                id=lid,
                name=_normalize(name),
                genus=meta(row, "genus"),
                family=meta(row, "family"),
                macroarea=meta(row, "macroarea"),
            )
        )
        for idx, fid, _ in feature_cols:
            raw = row[idx].strip() if idx < len(row) else ""
            if not raw:
                continue
            match = _CELL_VALUE.match(raw)
            if not match:
                raise ParseError(
                    f"{csv_path}:{rowno}: bad cell {raw!r} for language {lid!r} "
                    f"in feature column {fid!r}"
                )
            vid = int(match.group(1))
            if vid <= 0:
                raise ParseError(
                    f"{csv_path}:{rowno}: non-positive value id in column {fid!r}"
                )
            cells.add((lid, fid, vid))
            value_names.setdefault((fid, vid), (match.group(2) or "").strip())

    features = []
    for _, fid, fname in feature_cols:
        observed = sorted(vid for (f, vid) in value_names if f == fid)
        values = tuple((vid, value_names[(fid, vid)]) for vid in observed)
        features.append(
            Feature(id=fid, name=fname, area=areas.get(fid, "unknown"), values=values)
        )
    return TypologicalKB(tuple(languages), tuple(features), frozenset(cells))


# Canonical long format: four tab-separated sections in fixed order.
_SECTIONS = ("#languages", "#features", "#values", "#cells")


def save_long(kb: TypologicalKB, path) -> None:
    """Write the canonical long TSV; deterministic for equal KBs."""
    lines = ["#languages"]
    for lang in kb.languages:
        lines.append(
            "\t".join((lang.id, lang.name, lang.genus, lang.family, lang.macroarea))
        )
    lines.append("#features")
    for feat in kb.features:
        lines.append("\t".join((feat.id, feat.name, feat.area)))
    lines.append("#values")
    for feat in kb.features:
        for vid, vname in feat.values:
            lines.append("\t".join((feat.id, str(vid), vname)))
    lines.append("#cells")
    for lid, fid, vid in sorted(kb.cells):
        lines.append("\t".join((lid, fid, str(vid))))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_long(path) -> TypologicalKB:
    """Read the canonical long TSV written by save_long."""
    section = None
    languages = []
    feature_rows = []  # (id, name, area)
    values: dict[str, list[tuple[int, str]]] = {}
    cells = set()
    lang_ids = set()
    feat_ids = set()
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if line.startswith("#"):
            if line not in _SECTIONS:
                raise ParseError(f"{path}:{lineno}: unknown section {line!r}")
            section = line
            continue
        parts = line.split("\t")
        if section == "#languages":
            if len(parts) != 5:
                raise ParseError(f"{path}:{lineno}: language row needs 5 fields")
            if parts[0] in lang_ids:
                raise IntegrityError(f"{path}:{lineno}: duplicate language {parts[0]!r}")
            lang_ids.add(parts[0])
            languages.append(Language(*parts))
        elif section == "#features":
            if len(parts) != 3:
                raise ParseError(f"{path}:{lineno}: feature row needs 3 fields")
            if parts[0] in feat_ids:
                raise IntegrityError(f"{path}:{lineno}: duplicate feature {parts[0]!r}")
            feat_ids.add(parts[0])
            feature_rows.append(tuple(parts))
        elif section == "#values":
            if len(parts) != 3:
                raise ParseError(f"{path}:{lineno}: value row needs 3 fields")
            fid, vid_raw, vname = parts
            if fid not in feat_ids:
                raise IntegrityError(f"{path}:{lineno}: value for unknown feature {fid!r}")
            try:
                vid = int(vid_raw)
            except ValueError:
                raise ParseError(f"{path}:{lineno}: bad value id {vid_raw!r}") from None
            if vid <= 0:
                raise ParseError(f"{path}:{lineno}: non-positive value id {vid}")
            values.setdefault(fid, []).append((vid, vname))
        elif section == "#cells":
            if len(parts) != 3:
                raise ParseError(f"{path}:{lineno}: cell row needs 3 fields")
            lid, fid, vid_raw = parts
            if lid not in lang_ids:
                raise IntegrityError(f"{path}:{lineno}: cell for unknown language {lid!r}")
            if fid not in feat_ids:
                raise IntegrityError(f"{path}:{lineno}: cell for unknown feature {fid!r}")
            try:
                vid = int(vid_raw)
            except ValueError:
                raise ParseError(f"{path}:{lineno}: bad value id {vid_raw!r}") from None
            known = {v for v, _ in values.get(fid, [])}
            if vid not in known:
                raise IntegrityError(
                    f"{path}:{lineno}: cell value {vid} not in inventory of {fid!r}"
                )
            if (lid, fid) in {(l, f) for l, f, _ in cells}:
                raise IntegrityError(f"{path}:{lineno}: duplicate cell ({lid!r}, {fid!r})")
            cells.add((lid, fid, vid))
        else:
            raise ParseError(f"{path}:{lineno}: data before any section header")

    features = []
    for fid, fname, farea in feature_rows:
        inventory = tuple(sorted(values.get(fid, [])))
        features.append(Feature(id=fid, name=fname, area=farea, values=inventory))
    return TypologicalKB(tuple(languages), tuple(features), frozenset(cells))


def filter_kb(
    kb: TypologicalKB,
    min_value_count: int = 10,
    min_features_per_language: int = 10,
    min_branch_size: int = 4,
) -> TypologicalKB:
    """Single-pass sparsity filter: values, then languages, then branches.

    1. drop feature values observed in fewer than min_value_count languages;
    2. drop languages left with fewer than min_features_per_language
       observed features;
    3. drop languages whose genus then has min_branch_size or fewer
       languages remaining;
    finally drop features whose value inventory shrank below 2. Applied
    exactly once, in this order, with no fixpoint iteration.
    """
    value_counts = Counter((fid, vid) for _, fid, vid in kb.cells)
    keep_value = {pair for pair, count in value_counts.items() if count >= min_value_count}
    cells = {(l, f, v) for l, f, v in kb.cells if (f, v) in keep_value}

    per_language = Counter(lid for lid, _, _ in cells)
    keep_lang = {
        lang.id
        for lang in kb.languages
        if per_language[lang.id] >= min_features_per_language
    }

    genus_of = {lang.id: lang.genus for lang in kb.languages}
    genus_sizes = Counter(genus_of[lid] for lid in keep_lang)
    keep_lang = {lid for lid in keep_lang if genus_sizes[genus_of[lid]] > min_branch_size}
    cells = {(l, f, v) for l, f, v in cells if l in keep_lang}

    surviving_values = {
        feat.id: tuple(v for v in feat.values if (feat.id, v[0]) in keep_value)
        for feat in kb.features
    }
    keep_feat = {fid for fid, vals in surviving_values.items() if len(vals) >= 2}
    cells = {(l, f, v) for l, f, v in cells if f in keep_feat}

    languages = tuple(lang for lang in kb.languages if lang.id in keep_lang)
    features = tuple(
        Feature(feat.id, feat.name, feat.area, surviving_values[feat.id])
        for feat in kb.features
        if feat.id in keep_feat
    )
    return TypologicalKB(languages, features, frozenset(cells))
