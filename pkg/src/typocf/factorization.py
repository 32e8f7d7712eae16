"""Logistic matrix factorization over masked binary typology matrices.

Each language gets an embedding row lam and each binary column an embedding
e; an observed 0/1 entry is modeled as Bernoulli with
p = sigmoid(e . lam), trained by minimizing the summed negative
log-likelihood plus an L2 penalty. The penalty weight corresponds to an
isotropic Gaussian prior on the embeddings (weight = 1 / prior variance).

Three modes:
  joint              both embedding sides are learned from scratch;
  frozen-external    language rows come from a pretrained table and stay
                     fixed, which leaves the objective convex in the column
                     embeddings;
  finetuned-external language rows start from the table and keep training.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .binarize import BinaryMatrix
from .embeddings import LanguageEmbeddingTable
from .errors import FormatError
from .utils import AdamState, check_finite, rng_from_seed, sigmoid, stable_seed

JOINT = "joint"
FROZEN = "frozen-external"
FINETUNED = "finetuned-external"
MODES = (JOINT, FROZEN, FINETUNED)

REG_BOTH = "both"
REG_LANGUAGES = "languages-only"

# Log arguments are clamped here; keeps the loss finite for saturated
# probabilities without touching the gradient path.
_EPS = 1e-12

_MAGIC = b"TCFM"
_VERSION = 1
_MODE_CODES = {JOINT: 0, FROZEN: 1, FINETUNED: 2}
_CODE_MODES = {v: k for k, v in _MODE_CODES.items()}


@dataclass(frozen=True)
class TrainConfig:
    """Training recipe; defaults follow the reference setup.

    optimizer "adam" is the normal recipe; "sgd" is plain (full-gradient
    scaled) descent, useful where monotone descent must be provable.
    regularize "both" penalizes language and column embeddings,
    "languages-only" penalizes just the language side. The L2 term enters
    the loss as (l2_weight / 2) * ||theta||^2 so its gradient contribution
    is exactly l2_weight * theta.
    """

    d: int = 64
    epochs: int = 10
    batch_size: int = 64
    learning_rate: float = 0.001
    l2_weight: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    mode: str = JOINT
    regularize: str = REG_BOTH
    use_bias: bool = False
    optimizer: str = "adam"
    init_scale: float = 0.01

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.l2_weight < 0:
            raise ValueError("l2_weight must be >= 0")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.regularize not in (REG_BOTH, REG_LANGUAGES):
            raise ValueError(f"bad regularize setting {self.regularize!r}")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Learned parameters plus the id vocabularies they are aligned to."""

    language_ids: tuple[str, ...]
    column_labels: tuple[str, ...]
    lang_emb: np.ndarray  # (L, d)
    param_emb: np.ndarray  # (C, d)
    mode: str
    col_bias: np.ndarray | None = None  # (C,) when biases are enabled
    _lang_index: dict = field(init=False, repr=False)

    def __post_init__(self):
        check_finite("lang_emb", self.lang_emb)
        check_finite("param_emb", self.param_emb)
        L, d = self.lang_emb.shape
        C, d2 = self.param_emb.shape
        if d != d2 or d < 1:
            raise ValueError("embedding dimensions disagree")
        if L != len(self.language_ids) or C != len(self.column_labels):
            raise ValueError("embedding rows do not match id lists")
        if self.mode not in MODES:
            raise ValueError(f"bad mode {self.mode!r}")
        if self.col_bias is not None:
            check_finite("col_bias", self.col_bias)
            if self.col_bias.shape != (C,):
                raise ValueError("col_bias shape must be (n_columns,)")
        object.__setattr__(
            self, "_lang_index", {lid: i for i, lid in enumerate(self.language_ids)}
        )

    @property
    def d(self) -> int:
        return self.lang_emb.shape[1]

    def language_index(self, language_id: str) -> int:
        return self._lang_index[language_id]


def predict_prob(params: ModelParams, lang_index: int, col_index: int) -> float:
    """Bernoulli probability for one (language row, column) pair."""
    z = float(np.dot(params.lang_emb[lang_index], params.param_emb[col_index]))
    if params.col_bias is not None:
        z += float(params.col_bias[col_index])
    return float(sigmoid(z))


def predict_matrix(params: ModelParams) -> np.ndarray:
    """All pair probabilities at once, shape (n_languages, n_columns)."""
    z = params.lang_emb @ params.param_emb.T
    if params.col_bias is not None:
        z = z + params.col_bias[None, :]
    return sigmoid(z)


def _expand(matrix: BinaryMatrix, pairs):
    if hasattr(pairs, "train_pairs"):  # accept a SplitResult directly
        pairs = pairs.train_pairs
    return matrix.cells_for_pairs(pairs)


def _data_nll(params: ModelParams, rows, cols, targets) -> float:
    if rows.size == 0:
        return 0.0
    z = np.einsum("ij,ij->i", params.lang_emb[rows], params.param_emb[cols])
    if params.col_bias is not None:
        z = z + params.col_bias[cols]
    p = np.clip(sigmoid(z), _EPS, 1.0 - _EPS)
    return float(-np.sum(targets * np.log(p) + (1.0 - targets) * np.log1p(-p)))


def _penalty(params: ModelParams, l2_weight: float, regularize: str) -> float:
    total = 0.0
    if params.mode != FROZEN:  # frozen language rows are data, not parameters
        total += float(np.sum(params.lang_emb**2))
    if regularize == REG_BOTH:
        total += float(np.sum(params.param_emb**2))
    return 0.5 * l2_weight * total


def nll_loss(
    params: ModelParams,
    matrix: BinaryMatrix,
    pairs,
    l2_weight: float = 0.1,
    regularize: str = REG_BOTH,
) -> float:
    """Penalized negative log-likelihood over the given observed pairs."""
    rows, cols, targets = _expand(matrix, pairs)
    return _data_nll(params, rows, cols, targets) + _penalty(params, l2_weight, regularize)


def grad(
    params: ModelParams,
    matrix: BinaryMatrix,
    pairs,
    l2_weight: float = 0.1,
    regularize: str = REG_BOTH,
):
    """Exact gradient of nll_loss w.r.t. the free parameters.

    Returns (g_lang, g_param, g_bias); g_lang is all zeros in
    frozen-external mode and g_bias is None when biases are off. With an
    empty pair set the result is the pure prior term l2_weight * theta.
    """
    rows, cols, targets = _expand(matrix, pairs)
    g_lang = np.zeros_like(params.lang_emb)
    g_param = np.zeros_like(params.param_emb)
    g_bias = None if params.col_bias is None else np.zeros_like(params.col_bias)
    if rows.size:
        z = np.einsum("ij,ij->i", params.lang_emb[rows], params.param_emb[cols])
        if params.col_bias is not None:
            z = z + params.col_bias[cols]
        resid = sigmoid(z) - targets
        if params.mode != FROZEN:
            np.add.at(g_lang, rows, resid[:, None] * params.param_emb[cols])
        np.add.at(g_param, cols, resid[:, None] * params.lang_emb[rows])
        if g_bias is not None:
            np.add.at(g_bias, cols, resid)
    if params.mode != FROZEN:
        g_lang += l2_weight * params.lang_emb
    if regularize == REG_BOTH:
        g_param += l2_weight * params.param_emb
    return g_lang, g_param, g_bias


def _init_params(matrix: BinaryMatrix, config: TrainConfig, external) -> ModelParams:
    rng = rng_from_seed(config.seed)
    L, C = matrix.n_languages, matrix.n_columns
    if config.mode == JOINT:
        lang = rng.normal(0.0, config.init_scale, size=(L, config.d))
    else:
        if external is None:
            raise ValueError(f"mode {config.mode!r} needs an external embedding table")
        if external.dim != config.d:
            raise ValueError(
                f"external table dim {external.dim} != configured d {config.d}"
            )
        missing = [lid for lid in matrix.language_ids if lid not in external.vectors]
        if missing:
            raise ValueError(
                f"external table misses {len(missing)} matrix language(s), "
                f"first {missing[0]!r}"
            )
        lang = np.stack([external.get(lid) for lid in matrix.language_ids]).astype(
            np.float64
        )
    param = rng.normal(0.0, config.init_scale, size=(C, config.d))
    bias = np.zeros(C) if config.use_bias else None
    return ModelParams(
        language_ids=matrix.language_ids,
        column_labels=matrix.column_labels,
        lang_emb=lang,
        param_emb=param,
        mode=config.mode,
        col_bias=bias,
    )


def train(
    matrix: BinaryMatrix,
    train_pairs,
    config: TrainConfig,
    external: LanguageEmbeddingTable | None = None,
):
    """Minibatch training; returns (params, per-epoch loss trace).

    Cells are reshuffled every epoch with the run's seeded generator. Each
    batch gradient carries the L2 term scaled by batch_size / n_cells so an
    epoch's accumulated prior pressure matches the full objective; with
    batch_size >= n_cells every step uses the exact gradient. The trace
    holds nll_loss over the training pairs after each epoch; epochs=0
    returns the untouched initialization and an empty trace.
    """
    rows, cols, targets = _expand(matrix, train_pairs)
    if rows.size == 0:
        raise ValueError("training needs at least one observed cell")
    params = _init_params(matrix, config, external)
    lang = params.lang_emb.copy()
    param = params.param_emb.copy()
    bias = None if params.col_bias is None else params.col_bias.copy()
    train_lang = config.mode != FROZEN

    # Separate stream for shuffling so batch order is independent of how
    # many draws initialization consumed in each mode.
    rng = rng_from_seed(stable_seed(config.seed, "shuffle"))
    n_cells = rows.size
    opt_lang = opt_param = opt_bias = None
    if config.optimizer == "adam":

        def mk(shape):
            return AdamState(
                shape, config.learning_rate, config.beta1, config.beta2, config.epsilon
            )

        opt_lang = mk(lang.shape) if train_lang else None
        opt_param = mk(param.shape)
        opt_bias = mk(bias.shape) if bias is not None else None

    trace: list[float] = []
    for _ in range(config.epochs):
        order = rng.permutation(n_cells)
        for start in range(0, n_cells, config.batch_size):
            take = order[start : start + config.batch_size]
            b_rows, b_cols, b_t = rows[take], cols[take], targets[take]
            z = np.einsum("ij,ij->i", lang[b_rows], param[b_cols])
            if bias is not None:
                z = z + bias[b_cols]
            resid = sigmoid(z) - b_t
            scale = take.size / n_cells
            g_param = np.zeros_like(param)
            np.add.at(g_param, b_cols, resid[:, None] * lang[b_rows])
            if config.regularize == REG_BOTH:
                g_param += config.l2_weight * scale * param
            if train_lang:
                g_lang = np.zeros_like(lang)
                np.add.at(g_lang, b_rows, resid[:, None] * param[b_cols])
                g_lang += config.l2_weight * scale * lang
            if bias is not None:
                g_bias = np.zeros_like(bias)
                np.add.at(g_bias, b_cols, resid)
            if config.optimizer == "adam":
                if train_lang:
                    opt_lang.step(lang, g_lang)
                opt_param.step(param, g_param)
                if bias is not None:
                    opt_bias.step(bias, g_bias)
            else:
                if train_lang:
                    lang -= config.learning_rate * g_lang
                param -= config.learning_rate * g_param
                if bias is not None:
                    bias -= config.learning_rate * g_bias
        snapshot = ModelParams(
            language_ids=params.language_ids,
            column_labels=params.column_labels,
            lang_emb=lang.copy(),
            param_emb=param.copy(),
            mode=config.mode,
            col_bias=None if bias is None else bias.copy(),
        )
        trace.append(
            nll_loss(snapshot, matrix, [], config.l2_weight, config.regularize)
            + _data_nll(snapshot, rows, cols, targets)
        )
        params = snapshot
    return params, trace


def save_model(params: ModelParams, path) -> None:
    """Versioned little-endian binary checkpoint; round-trips bit-exactly."""
    ids_block = "\t".join(params.language_ids).encode("utf-8")
    cols_block = "\t".join(params.column_labels).encode("utf-8")
    L, d = params.lang_emb.shape
    C = params.param_emb.shape[0]
    head = np.array(
        [
            _VERSION,
            _MODE_CODES[params.mode],
            1 if params.col_bias is not None else 0,
            d,
            L,
            C,
            len(ids_block),
            len(cols_block),
        ],
        dtype="<u4",
    )
    with open(path, "wb") as handle:
        handle.write(_MAGIC)
        handle.write(head.tobytes())
        handle.write(ids_block)
        handle.write(cols_block)
        handle.write(np.ascontiguousarray(params.lang_emb, dtype="<f8").tobytes())
        handle.write(np.ascontiguousarray(params.param_emb, dtype="<f8").tobytes())
        if params.col_bias is not None:
            handle.write(np.ascontiguousarray(params.col_bias, dtype="<f8").tobytes())


def load_model(path) -> ModelParams:
    blob = Path(path).read_bytes()
    if blob[:4] != _MAGIC:
        raise FormatError(f"{path}: not a model file (bad magic)")
    if len(blob) < 4 + 32:
        raise FormatError(f"{path}: truncated header")
    head = np.frombuffer(blob, dtype="<u4", count=8, offset=4)
    version, mode_code, has_bias, d, L, C, ids_len, cols_len = (int(x) for x in head)
    if version != _VERSION:
        raise FormatError(f"{path}: unsupported model version {version}")
    if mode_code not in _CODE_MODES:
        raise FormatError(f"{path}: unknown mode code {mode_code}")
    offset = 4 + 32
    need = offset + ids_len + cols_len + 8 * (L * d + C * d + (C if has_bias else 0))
    if len(blob) != need:
        raise FormatError(f"{path}: expected {need} bytes, found {len(blob)}")
    ids = tuple(blob[offset : offset + ids_len].decode("utf-8").split("\t"))
    offset += ids_len
    cols = tuple(blob[offset : offset + cols_len].decode("utf-8").split("\t"))
    offset += cols_len
    if len(ids) != L or len(cols) != C:
        raise FormatError(f"{path}: id blocks disagree with header counts")
    lang = np.frombuffer(blob, dtype="<f8", count=L * d, offset=offset).reshape(L, d)
    offset += 8 * L * d
    param = np.frombuffer(blob, dtype="<f8", count=C * d, offset=offset).reshape(C, d)
    offset += 8 * C * d
    bias = None
    if has_bias:
        bias = np.frombuffer(blob, dtype="<f8", count=C, offset=offset).copy()
    return ModelParams(
        language_ids=ids,
        column_labels=cols,
        lang_emb=lang.copy(),
        param_emb=param.copy(),
        mode=_CODE_MODES[mode_code],
        col_bias=bias,
    )


def mf_grad_check(trials: int = 10, seed: int = 0, h: float = 1e-5) -> float:
    """Max guarded relative error of grad() vs central differences.

    Random small instances cycle through the three modes, bias on and off,
    and both regularization settings. Embeddings are drawn at a healthy
    scale so every coordinate carries signal.
    """
    from .binarize import binary_matrix_from_dense
    from .utils import max_relative_error

    rng = rng_from_seed(seed)
    worst = 0.0
    for trial in range(trials):
        L = int(rng.integers(3, 9))
        C = int(rng.integers(3, 13))
        d = int(rng.integers(2, 7))
        mode = MODES[trial % 3]
        regularize = (REG_BOTH, REG_LANGUAGES)[trial % 2]
        use_bias = bool(trial % 2)
        mask = rng.random((L, C)) < 0.8
        mask[0, 0] = True  # keep at least one observed cell
        entries = ((rng.random((L, C)) < 0.5) & mask).astype(np.float64)
        matrix = binary_matrix_from_dense(
            [f"l{i}" for i in range(L)], [f"f{j}" for j in range(C)], entries, mask
        )
        params = ModelParams(
            language_ids=matrix.language_ids,
            column_labels=matrix.column_labels,
            lang_emb=rng.normal(0.0, 0.6, (L, d)),
            param_emb=rng.normal(0.0, 0.6, (C, d)),
            mode=mode,
            col_bias=rng.normal(0.0, 0.3, C) if use_bias else None,
        )
        pairs = sorted(matrix.observed_pairs())
        g_lang, g_param, g_bias = grad(params, matrix, pairs, 0.1, regularize)

        free = [("param_emb", params.param_emb, g_param)]
        if mode != FROZEN:
            free.insert(0, ("lang_emb", params.lang_emb, g_lang))
        if use_bias:
            free.append(("col_bias", params.col_bias, g_bias))
        for _, theta, analytic in free:
            numeric = np.zeros_like(theta)
            flat, num = theta.ravel(), numeric.ravel()
            for idx in range(flat.size):
                keep = flat[idx]
                flat[idx] = keep + h
                up = nll_loss(params, matrix, pairs, 0.1, regularize)
                flat[idx] = keep - h
                down = nll_loss(params, matrix, pairs, 0.1, regularize)
                flat[idx] = keep
                num[idx] = (up - down) / (2.0 * h)
            worst = max(worst, max_relative_error(analytic, numeric))
    return worst


class TypologyFactorizer(BaseEstimator):
    """Estimator facade over train/predict for pipeline-style use.

    Parameters mirror TrainConfig. fit() takes the binary matrix and the
    training (language_id, feature_id) pairs; external modes additionally
    need an embedding table.
    """

    def __init__(
        self,
        d=64,
        epochs=10,
        batch_size=64,
        learning_rate=0.001,
        l2_weight=0.1,
        beta1=0.9,
        beta2=0.999,
        epsilon=1e-8,
        seed=0,
        mode=JOINT,
        regularize=REG_BOTH,
        use_bias=False,
        optimizer="adam",
        init_scale=0.01,
    ):
        self.d = d
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.l2_weight = l2_weight
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.seed = seed
        self.mode = mode
        self.regularize = regularize
        self.use_bias = use_bias
        self.optimizer = optimizer
        self.init_scale = init_scale

    def _config(self) -> TrainConfig:
        return TrainConfig(
            d=self.d,
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            l2_weight=self.l2_weight,
            beta1=self.beta1,
            beta2=self.beta2,
            epsilon=self.epsilon,
            seed=self.seed,
            mode=self.mode,
            regularize=self.regularize,
            use_bias=self.use_bias,
            optimizer=self.optimizer,
            init_scale=self.init_scale,
        )

    def fit(self, matrix: BinaryMatrix, train_pairs, external=None):
        self.params_, self.loss_trace_ = train(
            matrix, train_pairs, self._config(), external
        )
        self.matrix_ = matrix
        return self

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise NotFittedError("call fit() before predicting")

    def predict_proba(self) -> np.ndarray:
        self._check_fitted()
        return predict_matrix(self.params_)

    def predict(self, language_id: str, feature_id: str) -> int:
        """Most probable original value id for one pair."""
        self._check_fitted()
        from .evaluation import decode_argmax

        return decode_argmax(self.predict_proba(), self.matrix_, language_id, feature_id)


def with_config_overrides(config: TrainConfig, **overrides) -> TrainConfig:
    """Functional update helper used by the CLI."""
    return replace(config, **overrides)
