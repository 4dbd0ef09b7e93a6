"""Risk predictors over longitudinal code sequences.

A learner is a pure function of (batch, parameters): an embedding layer that
sums the rows of the active codes per visit, a CNN / LSTM / averaging
encoder, and an MLP head ending in a 2-way softmax. Parameters live in a
ParamSet so the meta-learning loop can differentiate through updates.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import autodiff as ad

PADDING_INDEX = 0
PROB_CLAMP = 1e-7

ENCODERS = ("cnn", "lstm", "mlp", "logistic")


@dataclass(frozen=True)
class Architecture:
    """Learner hyperparameters. vocab_size includes the padding index 0."""

    encoder: str = "cnn"
    vocab_size: int = 1017
    embed_dim: int = 256
    filter_sizes: tuple[int, ...] = (2, 3, 4)
    filters_per_size: int = 128
    hidden_dim: int | None = None          # lstm state size; defaults to embed_dim
    mlp_hidden: tuple[int, ...] = (128,)
    normalization: str | None = None       # default: batch (cnn) / layer (lstm) / none
    max_seq_len: int = 32
    dtype: str = "float32"

    def __post_init__(self):
        if self.encoder not in ENCODERS:
            raise ValueError(f"unknown encoder {self.encoder!r}")
        if self.vocab_size < 2:
            raise ValueError("vocab_size must be >= 2 (padding + one code)")
        dims = (self.embed_dim, self.filters_per_size, self.max_seq_len,
                *self.mlp_hidden, *self.filter_sizes)
        if any(d < 1 for d in dims):
            raise ValueError("all architecture dimensions must be >= 1")
        if self.normalization not in (None, "batch", "layer", "none"):
            raise ValueError(f"unknown normalization {self.normalization!r}")
        if self.dtype not in ("float32", "float64"):
            raise ValueError("dtype must be float32 or float64")

    @property
    def lstm_dim(self) -> int:
        return self.hidden_dim if self.hidden_dim is not None else self.embed_dim

    @property
    def norm_kind(self) -> str:
        if self.normalization not in (None,):
            return self.normalization
        return {"cnn": "batch", "lstm": "layer"}.get(self.encoder, "none")

    @property
    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64

    @property
    def feature_dim(self) -> int:
        """Width of the encoder output fed to the MLP head."""
        if self.encoder == "cnn":
            return self.filters_per_size * len(self.filter_sizes)
        if self.encoder == "lstm":
            return self.lstm_dim
        if self.encoder == "mlp":
            return self.embed_dim
        return self.vocab_size - 1  # logistic: code-count vector

    @property
    def tag(self) -> str:
        parts = [self.encoder, f"v{self.vocab_size}", f"d{self.embed_dim}"]
        if self.encoder == "cnn":
            parts.append("f" + "x".join(map(str, self.filter_sizes)) +
                         f"n{self.filters_per_size}")
        parts.append("h" + "-".join(map(str, self.mlp_hidden)))
        parts.append(self.norm_kind)
        return ":".join(parts)

    def to_dict(self) -> dict:
        return {
            "encoder": self.encoder, "vocab_size": self.vocab_size,
            "embed_dim": self.embed_dim, "filter_sizes": list(self.filter_sizes),
            "filters_per_size": self.filters_per_size, "hidden_dim": self.hidden_dim,
            "mlp_hidden": list(self.mlp_hidden), "normalization": self.normalization,
            "max_seq_len": self.max_seq_len, "dtype": self.dtype,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Architecture":
        d = dict(d)
        for key in ("filter_sizes", "mlp_hidden"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


@dataclass(frozen=True)
class Batch:
    """Padded code-index sequences for a group of patients.

    codes[b, t] holds the code indices active at visit t (padding 0 in both
    the slot and visit directions); lengths[b] is the true visit count.
    """

    codes: np.ndarray       # (B, T, S) int32
    lengths: np.ndarray     # (B,) int64
    labels: np.ndarray      # (B, 2) one-hot
    domain: str
    split: str              # "train" | "test"
    patient_ids: tuple[str, ...] = ()

    def __post_init__(self):
        if self.codes.ndim != 3 or self.labels.ndim != 2 or self.labels.shape[1] != 2:
            raise ValueError("malformed batch arrays")
        if self.codes.shape[0] != self.labels.shape[0]:
            raise ValueError("codes/labels row mismatch")
        if not np.all(self.labels.sum(axis=1) == 1.0):
            raise ValueError("labels must be one-hot rows")
        if np.any(self.lengths < 1):
            raise ValueError("every patient needs at least one visit")

    @property
    def size(self) -> int:
        return self.codes.shape[0]

    def label_indices(self) -> np.ndarray:
        return self.labels.argmax(axis=1)


class NormState:
    """Batch-norm running statistics, owned by a training loop (not by the
    ParamSet, so parameter freezing never touches it)."""

    def __init__(self, dim: int, dtype=np.float32):
        self.mean = np.zeros(dim, dtype=np.float64)
        self.var = np.ones(dim, dtype=np.float64)
        self.dtype = dtype

    def copy(self) -> "NormState":
        out = NormState(self.mean.shape[0], self.dtype)
        out.mean = self.mean.copy()
        out.var = self.var.copy()
        return out

    @classmethod
    def for_arch(cls, arch: Architecture) -> "NormState":
        return cls(arch.feature_dim, arch.np_dtype)


def make_norm_state(arch: Architecture) -> NormState | None:
    return NormState.for_arch(arch) if arch.norm_kind == "batch" else None


# --------------------------------------------------------------------------
# initialization

def _uniform(rng, shape, fan_in, dtype):
    bound = 1.0 / np.sqrt(max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def init_params(arch: Architecture, seed: int) -> ad.ParamSet:
    """Scaled-uniform fan-in initialization; the padding embedding row is
    zeroed and, because padded slots are masked out of every forward pass,
    receives no gradient and stays zero."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xA11C]))
    dt = arch.np_dtype
    tensors: dict[str, np.ndarray] = {}

    if arch.encoder != "logistic":
        emb = _uniform(rng, (arch.vocab_size, arch.embed_dim), arch.vocab_size, dt)
        emb[PADDING_INDEX] = 0.0
        tensors["embed.weight"] = emb
        tensors["embed.bias"] = _uniform(rng, (arch.embed_dim,), arch.vocab_size, dt)

    if arch.encoder == "cnn":
        for width in arch.filter_sizes:
            fan = width * arch.embed_dim
            tensors[f"conv{width}.weight"] = _uniform(
                rng, (arch.filters_per_size, width, arch.embed_dim), fan, dt)
            tensors[f"conv{width}.bias"] = _uniform(
                rng, (arch.filters_per_size,), fan, dt)
    elif arch.encoder == "lstm":
        d = arch.lstm_dim
        tensors["lstm.w_in"] = _uniform(rng, (arch.embed_dim, 4 * d), arch.embed_dim, dt)
        tensors["lstm.w_rec"] = _uniform(rng, (d, 4 * d), d, dt)
        tensors["lstm.bias"] = _uniform(rng, (4 * d,), d, dt)

    if arch.norm_kind in ("batch", "layer"):
        tensors["norm.gain"] = np.ones(arch.feature_dim, dtype=dt)
        tensors["norm.bias"] = np.zeros(arch.feature_dim, dtype=dt)

    in_dim = arch.feature_dim
    for i, width in enumerate((*arch.mlp_hidden, 2)):
        tensors[f"head{i}.weight"] = _uniform(rng, (in_dim, width), in_dim, dt)
        tensors[f"head{i}.bias"] = _uniform(rng, (width,), in_dim, dt)
        in_dim = width

    return ad.param_set_from_arrays(tensors, arch_tag=arch.tag)


def encoder_param_names(params: ad.ParamSet) -> frozenset[str]:
    """Embedding + encoder + norm parameters: the default frozen set."""
    return frozenset(n for n in params if not n.startswith("head"))


# --------------------------------------------------------------------------
# forward passes

def _check_batch(batch: Batch, arch: Architecture):
    if batch.codes.size and batch.codes.max() >= arch.vocab_size:
        raise ValueError(
            f"code index {int(batch.codes.max())} out of range for vocab "
            f"{arch.vocab_size}")
    if batch.codes.min() < 0:
        raise ValueError("negative code index")


def _embed_visits(batch: Batch, params, arch: Architecture) -> ad.Expr:
    """(B, T, d) visit embeddings: masked row-sum + bias, padded visits zero."""
    dt = arch.np_dtype
    slot_mask = (batch.codes != PADDING_INDEX).astype(dt)
    emb = ad.embed_bag(params["embed.weight"], batch.codes, slot_mask)
    emb = ad.add(emb, params["embed.bias"])
    t_idx = np.arange(batch.codes.shape[1])
    visit_mask = (t_idx[None, :] < batch.lengths[:, None]).astype(dt)
    return ad.mul(emb, ad.constant(visit_mask[:, :, None]))


def _encode_cnn(emb: ad.Expr, batch: Batch, params, arch: Architecture) -> ad.Expr:
    pooled = []
    for width in arch.filter_sizes:
        h = ad.conv1d(emb, params[f"conv{width}.weight"])
        h = ad.relu(ad.add(h, params[f"conv{width}.bias"]))
        # windows fully inside the true sequence; short sequences keep one
        valid = np.maximum(batch.lengths - width + 1, 1)
        valid = np.minimum(valid, h.shape[1])
        pooled.append(ad.maxpool_time(h, valid))
    return pooled[0] if len(pooled) == 1 else ad.concat(pooled, axis=1)


def _encode_lstm(emb: ad.Expr, batch: Batch, params, arch: Architecture) -> ad.Expr:
    b, t_max = batch.codes.shape[0], batch.codes.shape[1]
    d = arch.lstm_dim
    dt = arch.np_dtype
    h = ad.constant(np.zeros((b, d), dtype=dt))
    c = ad.constant(np.zeros((b, d), dtype=dt))
    w_in, w_rec, bias = params["lstm.w_in"], params["lstm.w_rec"], params["lstm.bias"]
    for t in range(t_max):
        x_t = ad.slice_axis(emb, 1, t, t + 1)
        x_t = ad.reshape(x_t, (b, arch.embed_dim))
        gates = ad.add(ad.add(ad.matmul(x_t, w_in), ad.matmul(h, w_rec)), bias)
        i_g = ad.sigmoid(ad.slice_axis(gates, 1, 0, d))
        f_g = ad.sigmoid(ad.slice_axis(gates, 1, d, 2 * d))
        g_g = ad.tanh(ad.slice_axis(gates, 1, 2 * d, 3 * d))
        o_g = ad.sigmoid(ad.slice_axis(gates, 1, 3 * d, 4 * d))
        c_new = ad.add(ad.mul(f_g, c), ad.mul(i_g, g_g))
        h_new = ad.mul(o_g, ad.tanh(c_new))
        # carry the previous state through padded steps
        m = ad.constant((batch.lengths > t).astype(dt)[:, None])
        keep = ad.constant((batch.lengths <= t).astype(dt)[:, None])
        c = ad.add(ad.mul(m, c_new), ad.mul(keep, c))
        h = ad.add(ad.mul(m, h_new), ad.mul(keep, h))
    return h


def _encode_mean(emb: ad.Expr, batch: Batch, arch: Architecture) -> ad.Expr:
    total = ad.reduce_sum(emb, axis=1)
    counts = batch.lengths.astype(arch.np_dtype)[:, None]
    return ad.div(total, ad.constant(counts))


def code_count_matrix(batch: Batch, vocab_size: int, dtype=np.float64) -> np.ndarray:
    """Per-patient frequency counts of each non-padding code. (B, V-1)"""
    b = batch.codes.shape[0]
    out = np.zeros((b, vocab_size - 1), dtype=dtype)
    for i in range(b):
        codes = batch.codes[i][batch.codes[i] != PADDING_INDEX]
        if codes.size:
            counts = np.bincount(codes, minlength=vocab_size)
        else:
            counts = np.zeros(vocab_size, dtype=np.int64)
        out[i] = counts[1:]
    return out


def learner_forward(batch: Batch, params: ad.ParamSet, arch: Architecture,
                    mode: str = "train", norm_state: NormState | None = None,
                    return_features: bool = False):
    """Per-patient class probabilities (B, 2).

    `mode` controls batch-norm statistics: "train" uses batch statistics
    (and updates `norm_state` when given), "eval" uses the running
    averages and requires `norm_state`. With `return_features`, also
    returns the penultimate MLP activation.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"unknown mode {mode!r}")
    _check_batch(batch, arch)

    if arch.encoder == "logistic":
        feats = ad.constant(code_count_matrix(batch, arch.vocab_size, arch.np_dtype))
    else:
        emb = _embed_visits(batch, params, arch)
        if arch.encoder == "cnn":
            feats = _encode_cnn(emb, batch, params, arch)
        elif arch.encoder == "lstm":
            feats = _encode_lstm(emb, batch, params, arch)
        else:
            feats = _encode_mean(emb, batch, arch)

    kind = arch.norm_kind
    if kind == "layer":
        feats = ad.layer_norm(feats, params["norm.gain"], params["norm.bias"])
    elif kind == "batch":
        if mode == "eval":
            if norm_state is None:
                raise ValueError("eval mode with batch norm needs a NormState")
            feats, _, _ = ad.batch_norm(feats, params["norm.gain"], params["norm.bias"],
                                        norm_state.mean, norm_state.var, training=False)
        else:
            running = norm_state if norm_state is not None else NormState.for_arch(arch)
            feats, new_mean, new_var = ad.batch_norm(
                feats, params["norm.gain"], params["norm.bias"],
                running.mean, running.var, training=True)
            if norm_state is not None:
                norm_state.mean, norm_state.var = new_mean, new_var

    hidden = feats
    n_layers = len(arch.mlp_hidden) + 1
    for i in range(n_layers):
        hidden = ad.add(ad.matmul(hidden, params[f"head{i}.weight"]),
                        params[f"head{i}.bias"])
        if i < n_layers - 1:
            hidden = ad.relu(hidden)
        if i == n_layers - 2:
            features = hidden
    if n_layers == 1:
        features = feats

    probs = ad.softmax(hidden, axis=-1)
    return (probs, features) if return_features else probs


def cross_entropy_loss(predictions: ad.Expr, labels: np.ndarray) -> ad.Expr:
    """Mean over patients of -(y^T log p + (1-y)^T log(1-p)).

    Both terms apply to the full 2-vector; probabilities are clamped to
    [1e-7, 1 - 1e-7] before the logs.
    """
    if predictions.shape[0] == 0:
        raise ValueError("empty batch")
    y = ad.constant(np.asarray(labels, dtype=predictions.dtype))
    p = ad.clip(predictions, PROB_CLAMP, 1.0 - PROB_CLAMP)
    pos = ad.mul(y, ad.log(p))
    negt = ad.mul(ad.sub(1.0, y), ad.log(ad.sub(1.0, p)))
    total = ad.reduce_sum(ad.add(pos, negt))
    return ad.scale(total, -1.0 / predictions.shape[0])


def batch_loss(batch: Batch, params: ad.ParamSet, arch: Architecture,
               mode: str = "train", norm_state: NormState | None = None) -> ad.Expr:
    return cross_entropy_loss(
        learner_forward(batch, params, arch, mode=mode, norm_state=norm_state),
        batch.labels)


def shrink(arch: Architecture, **overrides) -> Architecture:
    """Convenience for tests/experiments: derive a modified architecture."""
    return replace(arch, **overrides)
