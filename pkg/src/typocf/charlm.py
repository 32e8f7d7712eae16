"""Character-level recurrent language model with language embeddings.

A stacked LSTM (two layers by default) predicts the next character of a
text stream; the input at every timestep is the character embedding
concatenated with a per-language embedding, so a single model trained over
many languages is forced to pack language identity into those rows. The
rows are the product: after training they feed the factorization model's
external modes and the k-NN baseline.

Everything here is plain numpy with handwritten backpropagation through
time, which is what makes the finite-difference gradient check a real
check of the implementation rather than of a framework.

Streams are chunked into independent windows (hidden state resets per
window); windows from all languages are shuffled together into minibatches
by the seeded generator. The held-out dev slice is the final fraction of
each language's stream, scored by perplexity after every epoch for early
stopping.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embeddings import LanguageEmbeddingTable
from .utils import AdamState, max_relative_error, rng_from_seed, sigmoid, stable_seed


@dataclass(frozen=True)
class CharLMConfig:
    char_dim: int = 16
    lang_dim: int = 8
    hidden_dim: int = 32
    layers: int = 2
    bptt: int = 64
    batch_size: int = 16
    max_epochs: int = 50
    patience: int = 3
    learning_rate: float = 0.002
    dev_fraction: float = 0.1
    max_alphabet: int = 512
    seed: int = 0

    def __post_init__(self):
        for name in ("char_dim", "lang_dim", "hidden_dim", "layers", "bptt", "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.max_epochs < 1 or self.patience < 0:
            raise ValueError("max_epochs must be >= 1 and patience >= 0")
        if not (0.0 < self.dev_fraction < 1.0):
            raise ValueError("dev_fraction must lie strictly between 0 and 1")


def build_alphabet(corpus: dict[str, str], cap: int = 512) -> tuple[str, ...]:
    """Sorted union of characters across all streams; errors past the cap."""
    chars = sorted({ch for text in corpus.values() for ch in text})
    if not chars:
        raise ValueError("corpus is empty")
    if len(chars) > cap:
        raise ValueError(f"alphabet has {len(chars)} symbols, cap is {cap}")
    return tuple(chars)


def make_windows(corpus: dict[str, str], alphabet, config: CharLMConfig):
    """Chunk each language's stream into next-char prediction windows.

    Returns (train_windows, dev_windows, language_ids); a window is
    (lang_index, inputs, targets) with targets shifted one character ahead.
    The dev slice is the final dev_fraction of each stream (at least one
    character when the stream has two or more).
    """
    index = {ch: i for i, ch in enumerate(alphabet)}
    language_ids = tuple(sorted(corpus))
    train_windows, dev_windows = [], []
    for li, lid in enumerate(language_ids):
        text = corpus[lid]
        if len(text) < 2:
            continue
        encoded = np.array([index[ch] for ch in text], dtype=np.int64)
        n_dev = max(1, int(len(encoded) * config.dev_fraction))
        split_at = len(encoded) - n_dev
        for arr, sink in ((encoded[:split_at], train_windows), (encoded[split_at:], dev_windows)):
            if arr.size < 2:
                continue
            inputs, targets = arr[:-1], arr[1:]
            for start in range(0, inputs.size, config.bptt):
                chunk_in = inputs[start : start + config.bptt]
                chunk_tg = targets[start : start + config.bptt]
                if chunk_in.size:
                    sink.append((li, chunk_in, chunk_tg))
    return train_windows, dev_windows, language_ids


class CharLM:
    """The model: embeddings, stacked LSTM cells, softmax output head.

    Parameters live in a flat dict of float64 arrays so the optimizer and
    the gradient check can iterate them uniformly. Gate layout inside each
    (in_dim, 4H) weight is [input, forget, cell, output].
    """

    def __init__(self, config: CharLMConfig, alphabet, language_ids, seed=None):
        self.config = config
        self.alphabet = tuple(alphabet)
        self.language_ids = tuple(language_ids)
        rng = rng_from_seed(config.seed if seed is None else seed)
        V, E, G, H = len(alphabet), config.char_dim, config.lang_dim, config.hidden_dim
        params: dict[str, np.ndarray] = {
            # language rows start near zero so related languages drift
            # together instead of keeping their random offsets
            "char_emb": rng.normal(0.0, 0.1, size=(V, E)),
            "lang_emb": rng.normal(0.0, 0.01, size=(len(language_ids), G)),
        }
        in_dim = E + G
        for layer in range(config.layers):
            params[f"Wx{layer}"] = rng.normal(0.0, 1.0 / np.sqrt(in_dim), size=(in_dim, 4 * H))
            params[f"Wh{layer}"] = rng.normal(0.0, 1.0 / np.sqrt(H), size=(H, 4 * H))
            bias = np.zeros(4 * H)
            bias[H : 2 * H] = 1.0  # forget-gate bias opens the memory path
            params[f"b{layer}"] = bias
            in_dim = H
        # near-zero head keeps the untrained model at uniform predictions
        params["Wy"] = rng.normal(0.0, 0.01, size=(H, V))
        params["by"] = np.zeros(V)
        self.params = params

    def _forward(self, inputs, langs):
        """Run the stack; returns (logits, caches) for backprop."""
        p, cfg = self.params, self.config
        H = cfg.hidden_dim
        B, T = inputs.shape
        x = p["char_emb"][inputs]  # (B,T,E)
        lvec = p["lang_emb"][langs]  # (B,G)
        layer_in = np.concatenate([x, np.repeat(lvec[:, None, :], T, axis=1)], axis=2)
        caches = []
        for layer in range(cfg.layers):
            Wx, Wh, b = p[f"Wx{layer}"], p[f"Wh{layer}"], p[f"b{layer}"]
            h = np.zeros((B, H))
            c = np.zeros((B, H))
            steps = []
            out = np.empty((B, T, H))
            for t in range(T):
                z = layer_in[:, t] @ Wx + h @ Wh + b
                gi = sigmoid(z[:, :H])
                gf = sigmoid(z[:, H : 2 * H])
                gg = np.tanh(z[:, 2 * H : 3 * H])
                go = sigmoid(z[:, 3 * H :])
                c_prev, h_prev = c, h
                c = gf * c_prev + gi * gg
                tc = np.tanh(c)
                h = go * tc
                out[:, t] = h
                steps.append((gi, gf, gg, go, c_prev, h_prev, tc))
            caches.append((layer_in, steps, out))
            layer_in = out
        logits = layer_in @ p["Wy"] + p["by"]  # (B,T,V)
        return logits, caches

    def nll_sum(self, inputs, targets, langs) -> float:
        """Summed cross-entropy of the batch, no gradients."""
        logits, _ = self._forward(inputs, langs)
        return float(_ce_sum(logits, targets)[0])

    def loss_and_grads(self, inputs, targets, langs):
        """Summed cross-entropy plus gradients for every parameter array."""
        p, cfg = self.params, self.config
        H = cfg.hidden_dim
        E = cfg.char_dim
        B, T = inputs.shape
        logits, caches = self._forward(inputs, langs)
        loss, dlogits = _ce_sum(logits, targets)

        grads = {key: np.zeros_like(val) for key, val in p.items()}
        top_out = caches[-1][2]
        grads["Wy"] = np.einsum("bth,btv->hv", top_out, dlogits)
        grads["by"] = dlogits.sum(axis=(0, 1))
        d_out = dlogits @ p["Wy"].T  # gradient w.r.t. top layer outputs

        for layer in reversed(range(cfg.layers)):
            layer_in, steps, _ = caches[layer]
            Wx, Wh = p[f"Wx{layer}"], p[f"Wh{layer}"]
            gWx, gWh, gb = grads[f"Wx{layer}"], grads[f"Wh{layer}"], grads[f"b{layer}"]
            d_in = np.zeros_like(layer_in)
            dh_carry = np.zeros((B, H))
            dc_carry = np.zeros((B, H))
            for t in reversed(range(T)):
                gi, gf, gg, go, c_prev, h_prev, tc = steps[t]
                dh = d_out[:, t] + dh_carry
                dc = dh * go * (1.0 - tc * tc) + dc_carry
                d_go = dh * tc
                d_gi = dc * gg
                d_gg = dc * gi
                d_gf = dc * c_prev
                dz = np.concatenate(
                    [
                        d_gi * gi * (1.0 - gi),
                        d_gf * gf * (1.0 - gf),
                        d_gg * (1.0 - gg * gg),
                        d_go * go * (1.0 - go),
                    ],
                    axis=1,
                )
                gWx += layer_in[:, t].T @ dz
                gWh += h_prev.T @ dz
                gb += dz.sum(axis=0)
                d_in[:, t] = dz @ Wx.T
                dh_carry = dz @ Wh.T
                dc_carry = dc * gf
            d_out = d_in  # becomes dh for the layer below
        # the first layer's input gradient splits into the two embeddings
        np.add.at(grads["char_emb"], inputs, d_out[:, :, :E])
        np.add.at(grads["lang_emb"], langs, d_out[:, :, E:].sum(axis=1))
        return float(loss), grads

    def perplexity(self, windows) -> float:
        """exp(mean next-char NLL) over a window list."""
        total, count = 0.0, 0
        for batch in _batches(windows, self.config.batch_size):
            inputs, targets, langs = batch
            total += self.nll_sum(inputs, targets, langs)
            count += targets.size
        if count == 0:
            raise ValueError("no characters to score")
        return float(np.exp(total / count))

    def embedding_table(self) -> LanguageEmbeddingTable:
        emb = self.params["lang_emb"]
        return LanguageEmbeddingTable(
            dim=self.config.lang_dim,
            vectors={lid: emb[i].copy() for i, lid in enumerate(self.language_ids)},
        )


def _ce_sum(logits: np.ndarray, targets: np.ndarray):
    """Stable summed softmax cross-entropy and its logit gradient."""
    m = logits.max(axis=-1, keepdims=True)
    shifted = logits - m
    expd = np.exp(shifted)
    denom = expd.sum(axis=-1, keepdims=True)
    log_probs = shifted - np.log(denom)
    B, T = targets.shape
    bi, ti = np.meshgrid(np.arange(B), np.arange(T), indexing="ij")
    loss = -log_probs[bi, ti, targets].sum()
    dlogits = expd / denom
    dlogits[bi, ti, targets] -= 1.0
    return loss, dlogits


def _batches(windows, batch_size, order=None):
    """Group windows into equal-length batches, preserving the given order.

    Almost every window has the full bptt length; stream tails are shorter
    and simply close the current batch early.
    """
    seq = [windows[i] for i in order] if order is not None else list(windows)
    start = 0
    while start < len(seq):
        length = seq[start][1].size
        stop = start
        while (
            stop < len(seq)
            and stop - start < batch_size
            and seq[stop][1].size == length
        ):
            stop += 1
        chunk = seq[start:stop]
        inputs = np.stack([w[1] for w in chunk])
        targets = np.stack([w[2] for w in chunk])
        langs = np.array([w[0] for w in chunk], dtype=np.int64)
        yield inputs, targets, langs
        start = stop


def train_char_lm(corpus: dict[str, str], config: CharLMConfig):
    """Train the LM and return (language table, per-epoch dev perplexities).

    Early stopping: training halts once dev perplexity has not improved
    for config.patience consecutive epochs (or at max_epochs), and the
    language embeddings from the best epoch are returned.
    """
    alphabet = build_alphabet(corpus, config.max_alphabet)
    train_windows, dev_windows, language_ids = make_windows(corpus, alphabet, config)
    if not train_windows:
        raise ValueError("corpus too small: no training windows")
    if not dev_windows:
        raise ValueError("corpus too small: empty dev slice")
    model = CharLM(config, alphabet, language_ids)
    optimizers = {
        key: AdamState(val.shape, config.learning_rate)
        for key, val in model.params.items()
    }
    rng = rng_from_seed(stable_seed(config.seed, "lm-shuffle"))

    trace: list[float] = []
    best_ppl = np.inf
    best_emb = model.params["lang_emb"].copy()
    stale = 0
    for _ in range(config.max_epochs):
        order = rng.permutation(len(train_windows))
        for inputs, targets, langs in _batches(train_windows, config.batch_size, order):
            loss, grads = model.loss_and_grads(inputs, targets, langs)
            scale = 1.0 / targets.size  # per-character loss for stable step sizes
            for key, g in grads.items():
                optimizers[key].step(model.params[key], g * scale)
        ppl = model.perplexity(dev_windows)
        trace.append(ppl)
        if ppl < best_ppl:
            best_ppl = ppl
            best_emb = model.params["lang_emb"].copy()
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    table = LanguageEmbeddingTable(
        dim=config.lang_dim,
        vectors={lid: best_emb[i].copy() for i, lid in enumerate(language_ids)},
    )
    return table, trace


def lm_grad_check(config: CharLMConfig | None = None, seed: int = 7, h: float = 1e-5) -> float:
    """Max guarded relative error between BPTT and central differences.

    Uses a deliberately tiny model (hidden 4, two languages, three
    characters, sequence length 6) so every coordinate of every parameter
    array is checked; anything above ~1e-4 means the backward pass
    disagrees with the forward pass.
    """
    if config is None:
        config = CharLMConfig(
            char_dim=3, lang_dim=2, hidden_dim=4, layers=2, bptt=6, batch_size=2
        )
    rng = rng_from_seed(seed)
    model = CharLM(config, alphabet=("a", "b", "c"), language_ids=("l1", "l2"), seed=seed)
    # roughen the parameters so no gate sits at its init symmetry point
    for key in model.params:
        model.params[key] = model.params[key] + rng.normal(0.0, 0.05, model.params[key].shape)
    inputs = rng.integers(0, 3, size=(2, config.bptt))
    targets = rng.integers(0, 3, size=(2, config.bptt))
    langs = np.array([0, 1], dtype=np.int64)

    _, grads = model.loss_and_grads(inputs, targets, langs)
    worst = 0.0
    for key, theta in model.params.items():
        numeric = np.zeros_like(theta)
        flat = theta.ravel()
        num_flat = numeric.ravel()
        for idx in range(flat.size):
            keep = flat[idx]
            flat[idx] = keep + h
            up = model.nll_sum(inputs, targets, langs)
            flat[idx] = keep - h
            down = model.nll_sum(inputs, targets, langs)
            flat[idx] = keep
            num_flat[idx] = (up - down) / (2.0 * h)
        worst = max(worst, max_relative_error(grads[key], numeric))
    return worst


def load_corpus_dir(path) -> dict[str, str]:
    """Read <language_id>.txt files from a directory into a corpus dict."""
    root = Path(path)
    corpus = {}
    for file in sorted(root.glob("*.txt")):
        corpus[file.stem] = file.read_text(encoding="utf-8")
    if not corpus:
        raise ValueError(f"no *.txt streams found under {root}")
    return corpus
