"""Comparison methods: target-only supervised models, parameter-transfer
learning with an L2 anchor penalty, and hard-shared multitask learning.

`supervised_fit` is the single minibatch-Adam trainer shared by the
supervised baselines, TransLearn, and target fine-tuning, so paired
comparisons and the fine-tune/supervised equivalence hold exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from . import autodiff as ad
from .episodes import CASE, CONTROL, DatasetError, PatientRecord, make_batch
from .models import Architecture, NormState, batch_loss, code_count_matrix, \
    encoder_param_names, init_params, learner_forward, make_norm_state
from .training import Adam, TrainingError


@dataclass(frozen=True)
class FitConfig:
    lr: float = 1e-3
    epochs: int = 30
    batch_size: int = 32
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8


@dataclass(frozen=True)
class TransLearnConfig:
    """Parameter-transfer training: cross-entropy plus
    0.5 * anchor_weight * ||params - anchor||^2 over trainable parameters."""

    anchor: ad.ParamSet
    anchor_weight: float = 0.1
    fit: FitConfig = FitConfig()

    def __post_init__(self):
        if self.anchor_weight < 0:
            raise ValueError("anchor_weight must be >= 0")


@dataclass
class TrainedModel:
    """Uniform prediction surface over the learner families."""

    method: str
    arch: Architecture | None
    params: ad.ParamSet | None
    norm_state: NormState | None = None
    knn_features: np.ndarray | None = None
    knn_labels: np.ndarray | None = None
    knn_k: int = 5

    def predict_scores(self, patients: Sequence[PatientRecord]) -> np.ndarray:
        """P(case) per patient."""
        if self.method == "knn":
            return self._knn_scores(patients)
        batch = make_batch(patients, self.arch.vocab_size, self.arch.max_seq_len,
                           split="eval", min_seq_len=self._min_len())
        probs = learner_forward(batch, self.params, self.arch, mode="eval",
                                norm_state=self.norm_state).value
        return probs[:, 1].astype(np.float64)

    def _min_len(self) -> int:
        return max(self.arch.filter_sizes) if self.arch.encoder == "cnn" else 1

    def _knn_scores(self, patients: Sequence[PatientRecord]) -> np.ndarray:
        batch = make_batch(patients, self.knn_features.shape[1] + 1, 10 ** 6,
                           split="eval")
        feats = code_count_matrix(batch, self.knn_features.shape[1] + 1)
        d2 = ((feats[:, None, :] - self.knn_features[None, :, :]) ** 2).sum(axis=2)
        order = np.argsort(d2, axis=1, kind="stable")[:, :self.knn_k]
        return self.knn_labels[order].mean(axis=1)


def _anchor_penalty(params: ad.ParamSet, anchor: ad.ParamSet,
                    names: Sequence[str], weight: float) -> ad.Expr:
    terms = []
    for name in sorted(names):
        diff = ad.sub(params[name], anchor[name])
        terms.append(ad.reduce_sum(ad.mul(diff, diff)))
    total = terms[0]
    for t in terms[1:]:
        total = ad.add(total, t)
    return ad.scale(total, 0.5 * weight)


def supervised_fit(arch: Architecture, patients: Sequence[PatientRecord],
                   fit: FitConfig, init: ad.ParamSet | None = None,
                   norm_state: NormState | None = None,
                   frozen: frozenset[str] = frozenset(),
                   anchor: ad.ParamSet | None = None,
                   anchor_weight: float = 0.0
                   ) -> tuple[ad.ParamSet, NormState | None, list[float]]:
    """Minibatch Adam on the cross-entropy objective (plus optional L2
    anchor penalty on the trainable parameters). Frozen parameters are
    returned bit-identical. Deterministic under fit.seed."""
    labels = {p.label for p in patients}
    if labels != {CASE, CONTROL}:
        raise DatasetError("supervised training needs both classes present")
    params = init if init is not None else init_params(arch, fit.seed)
    state = norm_state.copy() if norm_state is not None else make_norm_state(arch)
    unknown = frozen - set(params)
    if unknown:
        raise TrainingError(f"frozen names not in ParamSet: {sorted(unknown)}")
    trainable = [n for n in params if n not in frozen]
    if not trainable:
        raise TrainingError("no trainable parameters")
    if anchor is not None and not params.same_structure(anchor):
        raise TrainingError("anchor ParamSet does not match the architecture")

    rng = np.random.default_rng(np.random.SeedSequence([int(fit.seed), 0xF17]))
    adam = Adam(fit.lr, fit.adam_beta1, fit.adam_beta2, fit.adam_eps)
    min_len = max(arch.filter_sizes) if arch.encoder == "cnn" else 1
    epoch_losses: list[float] = []
    index = np.arange(len(patients))
    for _ in range(fit.epochs):
        order = rng.permutation(index)
        epoch_total, seen = 0.0, 0
        for start in range(0, len(order), fit.batch_size):
            chunk = [patients[i] for i in order[start:start + fit.batch_size]]
            batch = make_batch(chunk, arch.vocab_size, arch.max_seq_len,
                               split="train", min_seq_len=min_len)
            loss = batch_loss(batch, params, arch, mode="train", norm_state=state)
            if anchor is not None and anchor_weight > 0.0:
                loss = ad.add(loss, _anchor_penalty(params, anchor, trainable,
                                                    anchor_weight))
            grads = ad.gradient(loss, {n: params[n] for n in trainable})
            new_arrays = adam.step(params.arrays(),
                                   {n: g.value for n, g in grads.items()})
            params = ad.ParamSet(
                {n: (params[n] if n in frozen else ad.leaf(new_arrays[n]))
                 for n in params},
                params.arch_tag)
            epoch_total += loss.item() * len(chunk)
            seen += len(chunk)
        epoch_losses.append(epoch_total / seen)
    return params, state, epoch_losses


def train_supervised(arch: Architecture, target_train: Sequence[PatientRecord],
                     seed: int, fit: FitConfig | None = None,
                     init: ad.ParamSet | None = None,
                     norm_state: NormState | None = None,
                     knn_k: int = 5) -> TrainedModel:
    """Target-only baseline for any encoder family, plus kNN.

    NN encoders minimize the cross-entropy with Adam; "logistic" runs on
    code-frequency count vectors; kNN takes a majority vote over Euclidean
    neighbors of the same count vectors.
    """
    fit = replace(fit or FitConfig(), seed=seed)
    if arch.encoder == "knn":
        raise ValueError('pass method="knn" via train_knn')
    params, state, _ = supervised_fit(arch, target_train, fit, init=init,
                                      norm_state=norm_state)
    return TrainedModel(method=arch.encoder, arch=arch, params=params,
                        norm_state=state)


def train_knn(vocab_size: int, target_train: Sequence[PatientRecord],
              k: int = 5) -> TrainedModel:
    if not target_train:
        raise DatasetError("empty training set")
    batch = make_batch(target_train, vocab_size, 10 ** 6, split="train")
    feats = code_count_matrix(batch, vocab_size)
    labels = np.array([p.label for p in target_train], dtype=np.int64)
    return TrainedModel(method="knn", arch=None, params=None,
                        knn_features=feats, knn_labels=labels, knn_k=k)


def train_translearn(cfg: TransLearnConfig, arch: Architecture,
                     target_train: Sequence[PatientRecord]) -> TrainedModel:
    """Fine-tune from a source-pretrained anchor with the deviation
    penalty; all parameters trainable."""
    if cfg.anchor.arch_tag != arch.tag:
        raise TrainingError(
            f"anchor was trained for {cfg.anchor.arch_tag!r}, not {arch.tag!r}")
    params, state, _ = supervised_fit(
        arch, target_train, cfg.fit, init=cfg.anchor.detached(),
        anchor=cfg.anchor, anchor_weight=cfg.anchor_weight)
    return TrainedModel(method="translearn", arch=arch, params=params,
                        norm_state=state)


def replace_method(model: TrainedModel, method: str) -> TrainedModel:
    out = TrainedModel(method=method, arch=model.arch, params=model.params,
                       norm_state=model.norm_state,
                       knn_features=model.knn_features,
                       knn_labels=model.knn_labels, knn_k=model.knn_k)
    return out


def _balanced_minibatch(cases: list, controls: list, n: int, rng) -> list:
    n_cases = (n + 1) // 2
    n_controls = n - n_cases
    picked = [cases[i] for i in rng.choice(len(cases), min(n_cases, len(cases)),
                                           replace=len(cases) < n_cases)]
    picked += [controls[i] for i in rng.choice(len(controls),
                                               min(n_controls, len(controls)),
                                               replace=len(controls) < n_controls)]
    return picked


def train_multilearn(domains: Mapping[str, Sequence[PatientRecord]],
                     arch: Architecture, seed: int,
                     fit: FitConfig | None = None,
                     steps: int | None = None) -> dict[str, TrainedModel]:
    """Hard parameter sharing: one embedding + encoder (+ norm) for all
    domains, one MLP head per domain. Each step draws a balanced batch per
    domain and sums the per-domain losses."""
    if len(domains) < 1:
        raise DatasetError("multitask training needs at least one domain")
    fit = replace(fit or FitConfig(), seed=seed)
    if len(domains) == 1:
        (dom, patients), = domains.items()
        model = train_supervised(arch, list(patients), seed, fit)
        return {dom: replace_method(model, "multilearn")}
    names = sorted(domains)
    base = init_params(arch, fit.seed)
    shared_names = sorted(encoder_param_names(base))
    head_names = [n for n in base if n.startswith("head")]

    combined: dict[str, ad.Expr] = {n: base[n] for n in shared_names}
    for i, dom in enumerate(names):
        head_init = init_params(arch, fit.seed + 7919 * (i + 1))
        for h in head_names:
            combined[f"{h}@{dom}"] = head_init[h]
    params = ad.ParamSet(combined, arch_tag=f"{arch.tag}:multitask")
    state = make_norm_state(arch)

    pools = {}
    for dom in names:
        cases = [p for p in domains[dom] if p.label == CASE]
        controls = [p for p in domains[dom] if p.label == CONTROL]
        if not cases or not controls:
            raise DatasetError(f"domain {dom!r} needs both classes")
        pools[dom] = (cases, controls)

    if steps is None:
        largest = max(len(v) for v in domains.values())
        steps = fit.epochs * max(1, int(np.ceil(largest / fit.batch_size)))
    rng = np.random.default_rng(np.random.SeedSequence([int(fit.seed), 0x3117]))
    adam = Adam(fit.lr, fit.adam_beta1, fit.adam_beta2, fit.adam_eps)
    min_len = max(arch.filter_sizes) if arch.encoder == "cnn" else 1

    def domain_view(all_params: ad.ParamSet, dom: str) -> ad.ParamSet:
        view = {n: all_params[n] for n in shared_names}
        view.update({h: all_params[f"{h}@{dom}"] for h in head_names})
        return ad.ParamSet(view, arch_tag=arch.tag)

    for _ in range(steps):
        total = None
        for dom in names:
            cases, controls = pools[dom]
            chunk = _balanced_minibatch(cases, controls, fit.batch_size, rng)
            batch = make_batch(chunk, arch.vocab_size, arch.max_seq_len,
                               split="train", min_seq_len=min_len)
            loss = batch_loss(batch, domain_view(params, dom), arch,
                              mode="train", norm_state=state)
            total = loss if total is None else ad.add(total, loss)
        grads = ad.gradient(total, params)
        new_arrays = adam.step(params.arrays(), {n: g.value for n, g in grads.items()})
        params = ad.param_set_from_arrays(new_arrays, params.arch_tag)

    out = {}
    for dom in names:
        out[dom] = TrainedModel(method="multilearn", arch=arch,
                                params=domain_view(params, dom),
                                norm_state=state)
    return out
