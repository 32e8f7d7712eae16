"""Experiment grid: branch x fraction x repeat x system, plus summaries.

A plan enumerates held-out branches, in-branch training fractions, repeat
indices, and systems (freq, knn, tcf, semisup). Every (branch, fraction,
repeat) job derives its own seeds from the plan's base seed with a stable
hash, so runs are independent of each other and of execution order; the
grid can execute across processes and still produce byte-identical
canonical output. A failing run is recorded with its error message and
never aborts the rest of the grid.

Within one repeat, the branch's eval set is shared across all fractions
(the split seed ignores the fraction) and the train side only grows with
the fraction, which keeps fraction-to-fraction comparisons paired.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .baselines import FrequencyBaseline, NearestNeighborBaseline
from .binarize import binarize
from .errors import NoPredictionError, ParseError
from .evaluation import aggregate_ci, decode_argmax, score
from .factorization import FINETUNED, JOINT, TrainConfig, predict_matrix, train
from .splits import SplitSpec, make_branch_split
from .utils import check_fraction, stable_seed

SYSTEMS = ("freq", "knn", "tcf", "semisup")


@dataclass(frozen=True)
class ExperimentPlan:
    branches: tuple[str, ...] = ()  # empty means every genus in the KB
    fractions: tuple[float, ...] = (0.0, 0.01, 0.05, 0.10, 0.20)
    repeats: int = 5
    systems: tuple[str, ...] = SYSTEMS
    eval_fraction: float = 0.8
    base_seed: int = 0

    def __post_init__(self):
        if self.repeats < 1:
            raise ValueError(f"repeats must be >= 1, got {self.repeats}")
        for fraction in self.fractions:
            check_fraction("fraction", fraction)
        check_fraction("eval_fraction", self.eval_fraction)
        bad = [s for s in self.systems if s not in SYSTEMS]
        if bad or not self.systems:
            raise ValueError(f"systems must be a nonempty subset of {SYSTEMS}, got {self.systems}")


@dataclass(frozen=True)
class RunRecord:
    branch: str
    macroarea: str
    fraction: float
    repeat: int
    system: str
    seed: int
    status: str  # "ok" or "error"
    micro_f1: float | None
    accuracy: float | None
    n_eval_cells: int
    per_area: tuple[tuple[str, float], ...]
    error: str = ""
    wall_time_s: float = 0.0

    def sort_key(self):
        return (self.branch, self.fraction, self.repeat, self.system)


def _branch_macroarea(kb, branch: str) -> str:
    from collections import Counter

    counts = Counter(l.macroarea for l in kb.languages if l.genus == branch)
    if not counts:
        return "unknown"
    return min(counts, key=lambda m: (-counts[m], m))


def _predict_mf(kb, matrix, split, config):
    params, _ = train(matrix, split.train_pairs, config)
    probs = predict_matrix(params)
    return {
        pair: decode_argmax(probs, matrix, pair[0], pair[1])
        for pair in split.eval_pairs
    }


def _predict_mf_external(kb, matrix, split, config, table):
    params, _ = train(matrix, split.train_pairs, config, external=table)
    probs = predict_matrix(params)
    return {
        pair: decode_argmax(probs, matrix, pair[0], pair[1])
        for pair in split.eval_pairs
    }


def _predict_cellwise(model, eval_pairs):
    predictions = {}
    for lid, fid in eval_pairs:
        try:
            predictions[(lid, fid)] = model.predict(lid, fid)
        except NoPredictionError:
            pass  # missing prediction is scored as wrong
    return predictions


def _run_job(kb, matrix, table, plan, mf_config, branch, fraction, repeat):
    """All requested systems for one (branch, fraction, repeat) job."""
    macroarea = _branch_macroarea(kb, branch)
    run_seed = stable_seed(plan.base_seed, branch, float(fraction), repeat)
    split_seed = stable_seed(plan.base_seed, branch, repeat, "split")
    records = []

    def failed(system, message, wall):
        return RunRecord(
            branch=branch,
            macroarea=macroarea,
            fraction=fraction,
            repeat=repeat,
            system=system,
            seed=run_seed,
            status="error",
            micro_f1=None,
            accuracy=None,
            n_eval_cells=0,
            per_area=(),
            error=" ".join(str(message).split()),
            wall_time_s=wall,
        )

    try:
        split = make_branch_split(
            kb,
            SplitSpec(
                held_out_branch=branch,
                eval_fraction=plan.eval_fraction,
                in_branch_fraction=fraction,
                seed=split_seed,
            ),
        )
        gold = {pair: kb.value_of(*pair) for pair in split.eval_pairs}
    except Exception as exc:  # degenerate branch: every system fails alike
        return [failed(system, exc, 0.0) for system in plan.systems]

    for system in plan.systems:
        began = time.perf_counter()
        try:
            if system == "freq":
                model = FrequencyBaseline().fit(kb, split.train_pairs)
                predictions = _predict_cellwise(model, split.eval_pairs)
            elif system == "knn":
                model = NearestNeighborBaseline(k=1).fit(table, kb, split.train_pairs)
                predictions = _predict_cellwise(model, split.eval_pairs)
            elif system == "tcf":
                config = replace(mf_config, mode=JOINT, seed=run_seed)
                predictions = _predict_mf(kb, matrix, split, config)
            else:  # semisup: start from the pretrained table, then finetune
                config = replace(
                    mf_config, mode=FINETUNED, d=table.dim, seed=run_seed
                )
                predictions = _predict_mf_external(kb, matrix, split, config, table)
            report = score(predictions, gold, kb)
            records.append(
                RunRecord(
                    branch=branch,
                    macroarea=macroarea,
                    fraction=fraction,
                    repeat=repeat,
                    system=system,
                    seed=run_seed,
                    status="ok",
                    micro_f1=report.micro_f1,
                    accuracy=report.accuracy,
                    n_eval_cells=report.n_eval_cells,
                    per_area=tuple(sorted(report.per_area_accuracy.items())),
                    wall_time_s=time.perf_counter() - began,
                )
            )
        except Exception as exc:
            records.append(failed(system, exc, time.perf_counter() - began))
    return records


def _run_job_star(args):
    return _run_job(*args)


def run_plan(kb, plan: ExperimentPlan, mf_config: TrainConfig | None = None,
             table=None, workers: int = 1) -> list[RunRecord]:
    """Execute the whole grid; returns records in canonical sorted order."""
    if mf_config is None:
        mf_config = TrainConfig()
    needs_table = {"knn", "semisup"} & set(plan.systems)
    if needs_table and table is None:
        raise ValueError(f"systems {sorted(needs_table)} need an embedding table")
    branches = plan.branches or tuple(sorted({l.genus for l in kb.languages}))
    needs_matrix = {"tcf", "semisup"} & set(plan.systems)
    matrix = binarize(kb) if needs_matrix else None

    jobs = [
        (kb, matrix, table, plan, mf_config, branch, fraction, repeat)
        for branch in branches
        for fraction in plan.fractions
        for repeat in range(plan.repeats)
    ]
    records: list[RunRecord] = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for result in pool.map(_run_job_star, jobs):
                records.extend(result)
    else:
        for job in jobs:
            records.extend(_run_job(*job))
    records.sort(key=RunRecord.sort_key)
    return records


_COLUMNS = (
    "branch",
    "macroarea",
    "fraction",
    "repeat",
    "system",
    "seed",
    "status",
    "micro_f1",
    "accuracy",
    "n_eval_cells",
    "per_area",
    "error",
)


def _pack_area(per_area) -> str:
    return ",".join(f"{area}={value:.6f}" for area, value in per_area)


def _unpack_area(packed: str):
    if not packed:
        return ()
    out = []
    for item in packed.split(","):
        area, _, value = item.rpartition("=")
        out.append((area, float(value)))
    return tuple(out)


def records_to_tsv(records, include_timing: bool = False) -> str:
    """Canonical TSV; timing is opt-in because it is never reproducible."""
    header = _COLUMNS + (("wall_time_s",) if include_timing else ())
    lines = ["\t".join(header)]
    for rec in sorted(records, key=RunRecord.sort_key):
        row = [
            rec.branch,
            rec.macroarea,
            repr(rec.fraction),
            str(rec.repeat),
            rec.system,
            str(rec.seed),
            rec.status,
            "NA" if rec.micro_f1 is None else f"{rec.micro_f1:.6f}",
            "NA" if rec.accuracy is None else f"{rec.accuracy:.6f}",
            str(rec.n_eval_cells),
            _pack_area(rec.per_area),
            rec.error,
        ]
        if include_timing:
            row.append(f"{rec.wall_time_s:.3f}")
        lines.append("\t".join(row))
    return "\n".join(lines) + "\n"


def write_records(records, path, include_timing: bool = False) -> None:
    Path(path).write_text(records_to_tsv(records, include_timing), encoding="utf-8")


def read_records(path) -> list[RunRecord]:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines:
        raise ParseError(f"{path}: empty records file")
    header = lines[0].split("\t")
    if tuple(header[: len(_COLUMNS)]) != _COLUMNS:
        raise ParseError(f"{path}: unexpected header {header!r}")
    has_timing = len(header) > len(_COLUMNS)
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != len(header):
            raise ParseError(f"{path}:{lineno}: expected {len(header)} fields")
        records.append(
            RunRecord(
                branch=parts[0],
                macroarea=parts[1],
                fraction=float(parts[2]),
                repeat=int(parts[3]),
                system=parts[4],
                seed=int(parts[5]),
                status=parts[6],
                micro_f1=None if parts[7] == "NA" else float(parts[7]),
                accuracy=None if parts[8] == "NA" else float(parts[8]),
                n_eval_cells=int(parts[9]),
                per_area=_unpack_area(parts[10]),
                error=parts[11],
                wall_time_s=float(parts[12]) if has_timing else 0.0,
            )
        )
    return records


def _mean_sd(values):
    arr = np.asarray(values, dtype=np.float64)
    mean = float(arr.mean())
    sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return mean, sd


def summarize(records) -> dict[str, str]:
    """Three canonical TSV tables keyed 'branches', 'macroareas', 'aggregate'.

    Branch table: mean and sample sd of micro-F1 per branch x fraction,
    one column pair per system. Macroarea table: mean micro-F1 with a 95%
    Student-t interval (endpoints clipped to [0, 1]) per macroarea x
    fraction x system. Aggregate table: the all-branches row per fraction
    and system. Failed runs are excluded from every statistic.
    """
    ok = [r for r in records if r.status == "ok" and r.micro_f1 is not None]
    systems = [s for s in SYSTEMS if any(r.system == s for r in ok)]

    by_branch: dict = {}
    for rec in ok:
        by_branch.setdefault((rec.macroarea, rec.branch, rec.fraction), {}).setdefault(
            rec.system, []
        ).append(rec.micro_f1)
    header = ["macroarea", "branch", "fraction"]
    for system in systems:
        header += [f"{system}_mean_f1", f"{system}_sd_f1", f"{system}_n"]
    branch_lines = ["\t".join(header)]
    for key in sorted(by_branch):
        macroarea, branch, fraction = key
        row = [macroarea, branch, repr(fraction)]
        for system in systems:
            values = by_branch[key].get(system, [])
            if values:
                mean, sd = _mean_sd(values)
                row += [f"{mean:.4f}", f"{sd:.4f}", str(len(values))]
            else:
                row += ["NA", "NA", "0"]
        branch_lines.append("\t".join(row))

    by_macro: dict = {}
    for rec in ok:
        by_macro.setdefault((rec.macroarea, rec.fraction, rec.system), []).append(
            rec.micro_f1
        )
    macro_lines = ["\t".join(("macroarea", "fraction", "system", "mean_f1", "ci_low", "ci_high", "n"))]
    for key in sorted(by_macro):
        macroarea, fraction, system = key
        values = by_macro[key]
        mean, half = aggregate_ci(values)
        low = max(0.0, mean - half)
        high = min(1.0, mean + half)
        macro_lines.append(
            "\t".join(
                (macroarea, repr(fraction), system, f"{mean:.4f}", f"{low:.4f}", f"{high:.4f}", str(len(values)))
            )
        )

    by_all: dict = {}
    for rec in ok:
        by_all.setdefault((rec.fraction, rec.system), []).append(rec.micro_f1)
    agg_lines = ["\t".join(("fraction", "system", "mean_f1", "sd_f1", "n"))]
    for key in sorted(by_all):
        fraction, system = key
        mean, sd = _mean_sd(by_all[key])
        agg_lines.append(
            "\t".join((repr(fraction), system, f"{mean:.4f}", f"{sd:.4f}", str(len(by_all[key]))))
        )

    return {
        "branches": "\n".join(branch_lines) + "\n",
        "macroareas": "\n".join(macro_lines) + "\n",
        "aggregate": "\n".join(agg_lines) + "\n",
    }
