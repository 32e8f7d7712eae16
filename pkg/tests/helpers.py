"""Shared test data builders.

Everything here is deliberately independent of the library's own loaders
and generators: builders construct KBs from first principles so tests can
hand-verify expectations against them.
"""

from __future__ import annotations

import numpy as np

from typocf.kb import Feature, Language, TypologicalKB

GENUS_POOL = ("alpine", "boreal", "coastal", "desert", "estuary", "fjord")
AREA_POOL = ("Word Order", "Phonology", "Morphology")
MACRO_POOL = ("Africa", "Eurasia", "Papunesia")


def make_random_kb(
    rng: np.random.Generator,
    n_languages: int = 12,
    n_features: int = 5,
    n_genera: int = 3,
    density: float = 0.8,
    max_values: int = 4,
) -> TypologicalKB:
    """A random valid KB; density is the per-pair observation probability."""
    languages = tuple(
        Language(
            id=f"l{i:03d}",
            name=f"Lang{i}",
            genus=GENUS_POOL[int(rng.integers(n_genera))],
            family=f"fam{int(rng.integers(2))}",
            macroarea=MACRO_POOL[int(rng.integers(len(MACRO_POOL)))],
        )
        for i in range(n_languages)
    )
    features = []
    for j in range(n_features):
        n_vals = int(rng.integers(2, max_values + 1))
        features.append(
            Feature(
                id=f"{j + 1}A",
                name=f"Feat{j}",
                area=AREA_POOL[int(rng.integers(len(AREA_POOL)))],
                values=tuple((v, f"v{v}") for v in range(1, n_vals + 1)),
            )
        )
    cells = set()
    for lang in languages:
        for feat in features:
            if rng.random() < density:
                vid = int(rng.integers(1, len(feat.values) + 1))
                cells.add((lang.id, feat.id, vid))
    return TypologicalKB(languages, tuple(features), frozenset(cells))


def observed_branches(kb: TypologicalKB) -> list[str]:
    """Genera that have at least one observed (language, feature) pair."""
    by_genus = {}
    observed = {lid for lid, _ in kb.observed_pairs()}
    for lang in kb.languages:
        if lang.id in observed:
            by_genus.setdefault(lang.genus, 0)
            by_genus[lang.genus] += 1
    return sorted(by_genus)


def markov_text(rng: np.random.Generator, transitions: dict, length: int) -> str:
    """Sample a character stream from an order-1 Markov chain.

    transitions maps char -> (next_chars, probabilities).
    """
    state = sorted(transitions)[0]
    out = [state]
    for _ in range(length - 1):
        nxt, probs = transitions[state]
        state = str(rng.choice(list(nxt), p=probs))
        out.append(state)
    return "".join(out)


AB_CHAIN = {"a": ("ab", (0.1, 0.9)), "b": ("ab", (0.9, 0.1))}
CD_CHAIN = {"c": ("cd", (0.8, 0.2)), "d": ("cd", (0.2, 0.8))}
