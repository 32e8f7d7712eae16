"""Branch-held-out train/eval splits over observed (language, feature) pairs.

A split hides one genealogical branch (WALS genus): a seeded shuffle of the
branch's observed pairs sends the first eval_fraction to the eval set, and
a prefix of the remainder (in_branch_fraction of it) back to train. All
observed pairs outside the branch always train. Because both cuts are
prefixes of one shuffle, growing in_branch_fraction under a fixed seed only
ever adds train pairs and never changes the eval set.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import DegenerateSplitError, ParseError
from .utils import check_fraction, half_up, rng_from_seed


@dataclass(frozen=True)
class SplitSpec:
    held_out_branch: str
    eval_fraction: float = 0.8
    in_branch_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        check_fraction("eval_fraction", self.eval_fraction)
        check_fraction("in_branch_fraction", self.in_branch_fraction)


@dataclass(frozen=True)
class SplitResult:
    spec: SplitSpec
    train_pairs: frozenset[tuple[str, str]]
    eval_pairs: frozenset[tuple[str, str]]


def make_branch_split(kb, spec: SplitSpec) -> SplitResult:
    """Deterministic branch-held-out split of a KB's observed pairs."""
    branch_langs = {l.id for l in kb.languages if l.genus == spec.held_out_branch}
    if not branch_langs:
        raise DegenerateSplitError(
            f"branch {spec.held_out_branch!r} has no languages in the KB"
        )
    observed = kb.observed_pairs()
    in_branch = sorted(pair for pair in observed if pair[0] in branch_langs)
    if not in_branch:
        raise DegenerateSplitError(
            f"branch {spec.held_out_branch!r} has no observed pairs"
        )
    out_branch = {pair for pair in observed if pair[0] not in branch_langs}

    rng = rng_from_seed(spec.seed)
    order = rng.permutation(len(in_branch))
    shuffled = [in_branch[i] for i in order]
    n_eval = half_up(spec.eval_fraction * len(shuffled))
    if n_eval == 0:
        raise DegenerateSplitError(
            f"eval_fraction {spec.eval_fraction} selects no eval pairs "
            f"from {len(shuffled)} in-branch pairs"
        )
    eval_pairs = shuffled[:n_eval]
    pool = shuffled[n_eval:]
    n_back = half_up(spec.in_branch_fraction * len(pool))
    train_pairs = out_branch | set(pool[:n_back])
    return SplitResult(spec, frozenset(train_pairs), frozenset(eval_pairs))


def validate_split(kb, matrix, split: SplitResult) -> list[str]:
    """Check a split against its KB and matrix; returns violations.

    Both sets are keyed by whole (language, feature) pairs, so a binary
    column group can only straddle train and eval if the same pair appears
    in both sets; that shows up as a disjointness violation.
    """
    violations = []
    overlap = split.train_pairs & split.eval_pairs
    for pair in sorted(overlap):
        violations.append(f"pair {pair!r} assigned to both train and eval")
    observed = kb.observed_pairs()
    branch_langs = {
        l.id for l in kb.languages if l.genus == split.spec.held_out_branch
    }
    for pair in sorted(split.train_pairs | split.eval_pairs):
        if pair not in observed:
            violations.append(f"pair {pair!r} is not observed in the KB")
    for pair in sorted(observed):
        if pair[0] not in branch_langs and pair not in split.train_pairs:
            violations.append(f"out-of-branch pair {pair!r} missing from train")
    for pair in sorted(split.eval_pairs):
        if pair[0] not in branch_langs:
            violations.append(f"eval pair {pair!r} lies outside the held-out branch")
    if matrix is not None:
        known = {(lid, g.feature_id) for lid in matrix.language_ids for g in matrix.groups}
        for pair in sorted(split.train_pairs | split.eval_pairs):
            if pair not in known:
                violations.append(f"pair {pair!r} has no column group in the matrix")
    return violations


def save_split(split: SplitResult, path) -> None:
    """Audit TSV: one #spec header line, then sorted (set, language, feature) rows."""
    spec = split.spec
    lines = [
        "#spec\t{}\t{}\t{}\t{}".format(
            spec.held_out_branch,
            repr(spec.eval_fraction),
            repr(spec.in_branch_fraction),
            spec.seed,
        )
    ]
    rows = [("train", lid, fid) for lid, fid in split.train_pairs]
    rows += [("eval", lid, fid) for lid, fid in split.eval_pairs]
    for row in sorted(rows):
        lines.append("\t".join(row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_split(path) -> SplitResult:
    text = Path(path).read_text(encoding="utf-8")
    spec = None
    train, eval_ = set(), set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if parts[0] == "#spec":
            if len(parts) != 5:
                raise ParseError(f"{path}:{lineno}: #spec line needs 5 fields")
            spec = SplitSpec(
                held_out_branch=parts[1],
                eval_fraction=float(parts[2]),
                in_branch_fraction=float(parts[3]),
                seed=int(parts[4]),
            )
            continue
        if len(parts) != 3:
            raise ParseError(f"{path}:{lineno}: split row needs 3 fields")
        which, lid, fid = parts
        if which == "train":
            train.add((lid, fid))
        elif which == "eval":
            eval_.add((lid, fid))
        else:
            raise ParseError(f"{path}:{lineno}: unknown set {which!r}")
    if spec is None:
        raise ParseError(f"{path}: missing #spec header line")
    return SplitResult(spec, frozenset(train), frozenset(eval_))
