"""Typological KB completion by logistic matrix factorization.

The package covers the full pipeline: ingesting a WALS-style table into a
typed KB, filtering it, binarizing features, branch-held-out splitting,
the factorization model with external-embedding modes, a character LM
that produces language embeddings, baselines, evaluation, analyses, and
an experiment harness. `typocf.cli` exposes everything on the command
line.
"""

from .analysis import (
    CorrelationMatrix,
    correlations,
    export_correlations,
    export_distributions,
    value_distributions,
)
from .baselines import FrequencyBaseline, NearestNeighborBaseline
from .binarize import (
    ONE_HOT,
    SINGLE_BINARY,
    BinaryMatrix,
    ColumnGroup,
    binarize,
    binary_matrix_from_dense,
    column_of,
    dump_matrix,
)
from .charlm import CharLM, CharLMConfig, lm_grad_check, load_corpus_dir, train_char_lm
from .embeddings import (
    LanguageEmbeddingTable,
    export_table,
    import_table,
    table_from_matrix,
)
from .errors import (
    DegenerateSplitError,
    FormatError,
    IntegrityError,
    NoPredictionError,
    ParseError,
    TypoCFError,
)
from .evaluation import EvalReport, aggregate_ci, decode_argmax, report_to_tsv, score
from .factorization import (
    FINETUNED,
    FROZEN,
    JOINT,
    MODES,
    ModelParams,
    TrainConfig,
    TypologyFactorizer,
    grad,
    load_model,
    mf_grad_check,
    nll_loss,
    predict_matrix,
    predict_prob,
    save_model,
    train,
)
from .harness import (
    SYSTEMS,
    ExperimentPlan,
    RunRecord,
    read_records,
    records_to_tsv,
    run_plan,
    summarize,
    write_records,
)
from .kb import (
    Feature,
    Language,
    TypologicalKB,
    filter_kb,
    load_feature_areas,
    load_long,
    load_wals_wide,
    save_long,
    validate_kb,
)
from .splits import (
    SplitResult,
    SplitSpec,
    load_split,
    make_branch_split,
    save_split,
    validate_split,
)
from .utils import half_up, max_relative_error, rng_from_seed, sigmoid, stable_seed

__version__ = "0.1.0"

__all__ = [
    "BinaryMatrix",
    "CharLM",
    "CharLMConfig",
    "ColumnGroup",
    "CorrelationMatrix",
    "DegenerateSplitError",
    "EvalReport",
    "ExperimentPlan",
    "FINETUNED",
    "FROZEN",
    "Feature",
    "FormatError",
    "FrequencyBaseline",
    "IntegrityError",
    "JOINT",
    "Language",
    "LanguageEmbeddingTable",
    "MODES",
    "ModelParams",
    "NearestNeighborBaseline",
    "NoPredictionError",
    "ONE_HOT",
    "ParseError",
    "RunRecord",
    "SINGLE_BINARY",
    "SYSTEMS",
    "SplitResult",
    "SplitSpec",
    "TrainConfig",
    "TypoCFError",
    "TypologicalKB",
    "TypologyFactorizer",
    "aggregate_ci",
    "binarize",
    "binary_matrix_from_dense",
    "column_of",
    "correlations",
    "decode_argmax",
    "dump_matrix",
    "export_correlations",
    "export_distributions",
    "export_table",
    "filter_kb",
    "grad",
    "half_up",
    "import_table",
    "lm_grad_check",
    "load_corpus_dir",
    "load_feature_areas",
    "load_long",
    "load_model",
    "load_split",
    "load_wals_wide",
    "make_branch_split",
    "max_relative_error",
    "mf_grad_check",
    "nll_loss",
    "predict_matrix",
    "predict_prob",
    "read_records",
    "records_to_tsv",
    "report_to_tsv",
    "rng_from_seed",
    "run_plan",
    "save_long",
    "save_model",
    "save_split",
    "score",
    "sigmoid",
    "stable_seed",
    "summarize",
    "table_from_matrix",
    "train",
    "train_char_lm",
    "validate_kb",
    "validate_split",
    "value_distributions",
    "write_records",
]
