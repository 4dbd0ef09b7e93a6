"""Meta-testing and target-domain adaptation.

Two separately reported paths adapt the meta-trained parameters to the
genuine target: episode-style fast adaptation on source batches at test
time, and fine-tuning the MLP head on a stratified fraction of the target
training split. Representation export writes the penultimate activations.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import autodiff as ad
from . import metrics
from .baselines import FitConfig, supervised_fit
from .episodes import CASE, CONTROL, DatasetError, DomainDataset, EpisodeSampler, \
    PatientRecord, make_batch, stratified_subset
from .models import Architecture, NormState, batch_loss, encoder_param_names, \
    learner_forward
from .training import MetaConfig, adapt_on_losses

STANDARD_FRACTIONS = (0.2, 0.4, 0.6, 0.8, 1.0)


@dataclass(frozen=True)
class FineTuneConfig:
    """Low-resource fine-tuning: a stratified `resource_fraction` of the
    target training split, default-frozen embedding/encoder/norm."""

    resource_fraction: float = 0.2
    frozen: tuple[str, ...] | None = None   # None selects the default set
    lr: float = 1e-3
    epochs: int = 30
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.resource_fraction <= 1.0):
            raise ValueError("resource_fraction must be in (0, 1]")

    def fit(self) -> FitConfig:
        return FitConfig(lr=self.lr, epochs=self.epochs,
                         batch_size=self.batch_size, seed=self.seed)


@dataclass
class EvalReport:
    scores: np.ndarray
    labels: np.ndarray
    auroc: float
    f1: float

    def as_dict(self) -> dict:
        return {"auroc": self.auroc, "f1": self.f1, "n": int(self.labels.size)}


def evaluate_scores(scores: np.ndarray, labels: np.ndarray,
                    threshold: float = 0.5) -> EvalReport:
    return EvalReport(
        scores=scores, labels=labels,
        auroc=metrics.auroc(scores, labels),
        f1=metrics.f1(metrics.scores_to_predictions(scores, threshold), labels))


def _min_len(arch: Architecture) -> int:
    return max(arch.filter_sizes) if arch.encoder == "cnn" else 1


def predict(params: ad.ParamSet, patients: Sequence[PatientRecord],
            arch: Architecture, norm_state: NormState | None) -> np.ndarray:
    batch = make_batch(patients, arch.vocab_size, arch.max_seq_len,
                       split="eval", min_seq_len=_min_len(arch))
    probs = learner_forward(batch, params, arch, mode="eval",
                            norm_state=norm_state).value
    return probs[:, 1].astype(np.float64)


def meta_test(params: ad.ParamSet, sources: Sequence[DomainDataset],
              target: DomainDataset, arch: Architecture, config: MetaConfig,
              norm_state: NormState | None = None, k_test: int = 1,
              n_episodes: int = 1, seed: int | None = None) -> EvalReport:
    """Episode-style evaluation on the genuine target's test split.

    Testing episodes come from the source train splits; the parameters take
    k_test descent steps on their summed losses and the adapted learner
    scores the held-out target patients (per-episode probabilities are
    averaged when n_episodes > 1). Target training labels are never read.
    """
    if target.name in {s.name for s in sources}:
        raise DatasetError("genuine target cannot be a source domain")
    test_patients = target.test_patients
    if not test_patients:
        raise DatasetError(f"target domain {target.name!r} has an empty test split")
    target_batch = make_batch(test_patients, arch.vocab_size, arch.max_seq_len,
                              split="test", min_seq_len=_min_len(arch))
    # testing episodes hold one balanced batch per source domain
    sampler = EpisodeSampler(
        sources[:-1], sources[-1], n_per_domain=config.n_per_domain,
        vocab_size=arch.vocab_size, max_seq_len=arch.max_seq_len,
        seed=config.seed if seed is None else seed,
        min_seq_len=_min_len(arch), forbidden_domains=(target.name,))
    eval_state = norm_state.copy() if norm_state is not None else None

    def batch_losses(episode) -> list:
        return [(lambda b: lambda p: batch_loss(b, p, arch, mode="train"))(b)
                for b in episode.batches]

    score_sum = np.zeros(len(test_patients), dtype=np.float64)
    for _ in range(max(n_episodes, 1)):
        episode = sampler.sample_episode()
        if k_test >= 1 and config.inner_lr > 0.0:
            adapted, _ = adapt_on_losses(params, batch_losses(episode),
                                         config.inner_lr, k_test,
                                         create_graph=False)
        else:
            adapted = params
        probs = learner_forward(target_batch, adapted, arch, mode="eval",
                                norm_state=eval_state).value
        score_sum += probs[:, 1]
    scores = score_sum / max(n_episodes, 1)
    return evaluate_scores(scores, target_batch.label_indices())


def default_frozen(params: ad.ParamSet) -> frozenset[str]:
    return encoder_param_names(params)


def fine_tune(params: ad.ParamSet, target: DomainDataset, arch: Architecture,
              cfg: FineTuneConfig, norm_state: NormState | None = None
              ) -> tuple[ad.ParamSet, NormState | None, list[PatientRecord]]:
    """Adapt to the target with a stratified resource fraction of its train
    split; frozen parameters come back bit-identical.

    Subsets are nested across fractions under one seed, so resource-level
    sweeps compare growing supersets of patients.
    """
    pool = target.train_patients
    if not pool:
        raise DatasetError(f"target domain {target.name!r} has an empty train split")
    subset: list[PatientRecord] = []
    for attempt in range(10):
        subset = stratified_subset(pool, cfg.resource_fraction,
                                   cfg.seed + 1000003 * attempt)
        if {p.label for p in subset} == {CASE, CONTROL}:
            break
    else:
        raise DatasetError(
            f"could not draw a two-class subsample at fraction "
            f"{cfg.resource_fraction} from {target.name!r}")
    if len(subset) < 2:
        raise DatasetError("fine-tuning needs at least two patients")
    frozen = (default_frozen(params) if cfg.frozen is None
              else frozenset(cfg.frozen))
    tuned, state, _ = supervised_fit(arch, subset, cfg.fit(),
                                     init=params, norm_state=norm_state,
                                     frozen=frozen)
    return tuned, state, subset


def export_representations(params: ad.ParamSet,
                           patients: Sequence[PatientRecord],
                           arch: Architecture,
                           norm_state: NormState | None = None,
                           path: str | None = None,
                           chunk_size: int = 256) -> np.ndarray:
    """Penultimate-layer activation per patient, optionally written as CSV
    with header domain,label,f0..f{D-1}."""
    rows = []
    for start in range(0, len(patients), chunk_size):
        chunk = patients[start:start + chunk_size]
        batch = make_batch(chunk, arch.vocab_size, arch.max_seq_len,
                           split="eval", min_seq_len=_min_len(arch))
        _, features = learner_forward(batch, params, arch, mode="eval",
                                      norm_state=norm_state,
                                      return_features=True)
        rows.append(features.value)
    matrix = np.concatenate(rows, axis=0) if rows else np.zeros((0, 0))
    if path is not None:
        dim = matrix.shape[1]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["domain", "label"] + [f"f{i}" for i in range(dim)])
            for p, vec in zip(patients, matrix):
                writer.writerow([p.domain, p.label] +
                                [f"{v:.6g}" for v in vec])
    return matrix
