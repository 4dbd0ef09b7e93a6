"""Meta-training: inner fast adaptation, the source-supervised outer
objective, and the meta-gradient loop.

One outer iteration samples a batch of episodes. For each episode the
parameters take k plain gradient steps on the summed source losses (the
batches stay fixed across steps); the outer objective evaluates the
simulated-target loss at the adapted parameters plus `source_weight` times
the source losses at the *unadapted* parameters, and its gradient w.r.t.
the unadapted parameters drives one Adam update.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import autodiff as ad
from . import metrics
from .episodes import DomainDataset, Episode, EpisodeSampler, make_batch
from .models import Architecture, Batch, NormState, batch_loss, init_params, \
    learner_forward, make_norm_state

LossFn = Callable[[ad.ParamSet], ad.Expr]

DIVERGENCE_LIMIT = 1e6


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class MetaConfig:
    """Hyperparameters of the meta-training loop."""

    inner_lr: float = 0.01          # fast-adaptation step size
    meta_lr: float = 0.001          # outer Adam rate
    source_weight: float = 0.5      # weight of the source term in the objective
    inner_steps: int = 3
    episode_batch_size: int = 32
    n_per_domain: int = 8
    order: str = "second"           # "second" | "first"
    max_iters: int = 500
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    eval_patients: int = 256        # held-out simulated-target eval cap
    eval_after_adaptation: bool = True  # evaluate as deployed: post fast-adaptation

    def __post_init__(self):
        if self.inner_lr <= 0 or self.meta_lr <= 0:
            raise ValueError("learning rates must be positive")
        if self.source_weight < 0:
            raise ValueError("source_weight must be >= 0")
        if self.inner_steps < 1:
            raise ValueError("inner_steps must be >= 1")
        if self.order not in ("second", "first"):
            raise ValueError("order must be 'second' or 'first'")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "inner_lr", "meta_lr", "source_weight", "inner_steps",
            "episode_batch_size", "n_per_domain", "order", "max_iters",
            "adam_beta1", "adam_beta2", "adam_eps", "seed", "eval_patients",
            "eval_after_adaptation")}

    @classmethod
    def from_dict(cls, d: Mapping) -> "MetaConfig":
        return cls(**dict(d))


class Adam:
    """Adaptive-moment optimizer with bias correction; one state slot per
    parameter name, allocated lazily."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    @classmethod
    def from_config(cls, config: MetaConfig, lr: float | None = None) -> "Adam":
        return cls(lr if lr is not None else config.meta_lr,
                   config.adam_beta1, config.adam_beta2, config.adam_eps)

    def step(self, params: Mapping[str, np.ndarray],
             grads: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
        """One update; parameters without a gradient entry pass through."""
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        out: dict[str, np.ndarray] = {}
        for name, value in params.items():
            g = grads.get(name)
            if g is None:
                out[name] = value
                continue
            if name not in self.m:
                self.m[name] = np.zeros_like(value, dtype=np.float64)
                self.v[name] = np.zeros_like(value, dtype=np.float64)
            m = self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * g
            v = self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * (g * g)
            step = self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            out[name] = (value - step).astype(value.dtype)
        return out


# --------------------------------------------------------------------------
# loss closures

def episode_source_losses(episode: Episode, arch: Architecture,
                          norm_state: NormState | None = None) -> list[LossFn]:
    def make(batch: Batch) -> LossFn:
        return lambda params: batch_loss(batch, params, arch, mode="train",
                                         norm_state=norm_state)
    return [make(b) for b in episode.source_batches]


def episode_target_loss(episode: Episode, arch: Architecture,
                        norm_state: NormState | None = None) -> LossFn:
    batch = episode.target_batch
    return lambda params: batch_loss(batch, params, arch, mode="train",
                                     norm_state=norm_state)


def _sum_losses(losses: Sequence[ad.Expr]) -> ad.Expr:
    total = losses[0]
    for term in losses[1:]:
        total = ad.add(total, term)
    return total


# --------------------------------------------------------------------------
# fast adaptation and the meta-gradient (generic over loss closures)

def adapt_on_losses(params: ad.ParamSet, source_losses: Sequence[LossFn],
                    inner_lr: float, steps: int, create_graph: bool
                    ) -> tuple[ad.ParamSet, list[ad.Expr]]:
    """k gradient-descent steps on the summed source losses.

    Returns the adapted ParamSet and the first step's per-source loss
    expressions (evaluated at the unadapted parameters), which the outer
    objective reuses. With create_graph the adapted parameters stay
    differentiable w.r.t. the originals.
    """
    if steps < 1:
        raise TrainingError("inner adaptation needs steps >= 1")
    current = params
    first_losses: list[ad.Expr] = []
    for step_idx in range(steps):
        losses = [fn(current) for fn in source_losses]
        if step_idx == 0:
            first_losses = losses
        total = _sum_losses(losses)
        if not math.isfinite(total.item()):
            raise TrainingError(f"non-finite source loss at inner step {step_idx}")
        grads = ad.gradient(total, current, create_graph=create_graph)
        current = ad.ParamSet(
            {name: ad.sub(current[name], ad.scale(grads[name], inner_lr))
             for name in current},
            current.arch_tag)
    return current, first_losses


def inner_adapt(params: ad.ParamSet, episode: Episode, arch: Architecture,
                inner_lr: float, steps: int, create_graph: bool = False,
                norm_state: NormState | None = None) -> ad.ParamSet:
    """Fast adaptation on an episode's fixed source batches."""
    adapted, _ = adapt_on_losses(params, episode_source_losses(episode, arch, norm_state),
                                 inner_lr, steps, create_graph)
    return adapted


def objective_on_losses(source_losses_at_origin: Sequence[ad.Expr],
                        target_loss_at_adapted: ad.Expr,
                        source_weight: float) -> ad.Expr:
    """target loss (adapted params) + weight * sum of source losses
    (unadapted params)."""
    if source_weight == 0.0:
        return target_loss_at_adapted
    return ad.add(target_loss_at_adapted,
                  ad.scale(_sum_losses(source_losses_at_origin), source_weight))


def meta_objective(params: ad.ParamSet, adapted: ad.ParamSet, episode: Episode,
                   arch: Architecture, source_weight: float,
                   norm_state: NormState | None = None) -> ad.Expr:
    """Combined outer loss for one episode; the source term is evaluated at
    the unadapted parameters."""
    if not params.same_structure(adapted):
        raise TrainingError("adapted parameters do not match the originals")
    target = episode_target_loss(episode, arch, norm_state)(adapted)
    sources = [fn(params) for fn in episode_source_losses(episode, arch, norm_state)]
    return objective_on_losses(sources, target, source_weight)


def meta_gradient_on_losses(params: ad.ParamSet, source_losses: Sequence[LossFn],
                            target_loss: LossFn, inner_lr: float, steps: int,
                            source_weight: float, order: str = "second"
                            ) -> tuple[dict[str, np.ndarray], dict[str, float]]:
    """Gradient of the combined objective w.r.t. the unadapted parameters.

    Second order differentiates through the adaptation; first order
    detaches the inner gradients, so the target term contributes the
    adapted-parameter gradient unchanged.
    """
    create_graph = order == "second"
    adapted, first_losses = adapt_on_losses(params, source_losses, inner_lr,
                                            steps, create_graph)
    target = target_loss(adapted)
    objective = objective_on_losses(first_losses, target, source_weight)
    grads = ad.gradient(objective, params)
    values = {
        "source_loss": float(sum(l.item() for l in first_losses)),
        "target_loss": target.item(),
        "combined_loss": objective.item(),
    }
    return {name: g.value for name, g in grads.items()}, values


def meta_gradient(params: ad.ParamSet, episode: Episode, arch: Architecture,
                  config: MetaConfig, norm_state: NormState | None = None
                  ) -> tuple[dict[str, np.ndarray], dict[str, float]]:
    return meta_gradient_on_losses(
        params, episode_source_losses(episode, arch, norm_state),
        episode_target_loss(episode, arch, norm_state),
        config.inner_lr, config.inner_steps, config.source_weight, config.order)


def meta_train_step(params: ad.ParamSet, episode_batch: Sequence[Episode],
                    arch: Architecture, config: MetaConfig, adam: Adam,
                    norm_state: NormState | None = None
                    ) -> tuple[ad.ParamSet, dict[str, float]]:
    """Average the meta-gradient over the episode batch (fixed episode
    order), then apply one Adam update."""
    if not episode_batch:
        raise TrainingError("empty episode batch")
    grad_sum: dict[str, np.ndarray] = {n: np.zeros_like(p.value, dtype=np.float64)
                                       for n, p in params.items()}
    totals = {"source_loss": 0.0, "target_loss": 0.0, "combined_loss": 0.0}
    for episode in episode_batch:
        grads, values = meta_gradient(params, episode, arch, config, norm_state)
        for name in grad_sum:
            grad_sum[name] += grads[name]
        for key in totals:
            totals[key] += values[key]
    n = len(episode_batch)
    mean_grads = {name: g / n for name, g in grad_sum.items()}
    record = {key: value / n for key, value in totals.items()}
    for value in record.values():
        if not math.isfinite(value) or abs(value) > DIVERGENCE_LIMIT:
            raise TrainingError(f"training diverged: {record}")
    new_arrays = adam.step(params.arrays(), mean_grads)
    return ad.param_set_from_arrays(new_arrays, params.arch_tag), record


@dataclass
class TrainHistory:
    """One record per completed outer iteration."""

    records: list[dict] = field(default_factory=list)

    def append(self, **fields):
        self.records.append(dict(fields))

    def __len__(self):
        return len(self.records)

    def series(self, key: str) -> list[float]:
        return [r[key] for r in self.records]


@dataclass
class MetaTrainResult:
    params: ad.ParamSet
    norm_state: NormState | None
    history: TrainHistory
    arch: Architecture
    config: MetaConfig


def _eval_holdout(params: ad.ParamSet, batch: Batch, arch: Architecture,
                  norm_state: NormState | None, config: MetaConfig,
                  eval_episode: Episode | None) -> tuple[float, float]:
    """Held-out simulated-target metrics; with eval_after_adaptation the
    parameters first take the configured fast-adaptation steps on a fixed
    set of source batches (the initialization is measured as deployed)."""
    if eval_episode is not None:
        losses = episode_source_losses(eval_episode, arch, norm_state=None)
        params, _ = adapt_on_losses(params, losses, config.inner_lr,
                                    config.inner_steps, create_graph=False)
    probs = learner_forward(batch, params, arch, mode="eval",
                            norm_state=norm_state).value
    scores = probs[:, 1]
    labels = batch.label_indices()
    return (metrics.auroc(scores, labels),
            metrics.f1(metrics.scores_to_predictions(scores), labels))


def meta_train(sources: Sequence[DomainDataset], simulated_target: DomainDataset,
               arch: Architecture, config: MetaConfig,
               forbidden_domains: Sequence[str] = ()) -> MetaTrainResult:
    """Full meta-training loop; deterministic under config.seed.

    Held-out evaluation uses the simulated target's test split, which the
    sampler never touches.
    """
    if len(sources) < 1:
        raise TrainingError("meta-training needs at least one source domain")
    params = init_params(arch, config.seed)
    norm_state = make_norm_state(arch)
    sampler = EpisodeSampler(sources, simulated_target,
                             n_per_domain=config.n_per_domain,
                             vocab_size=arch.vocab_size,
                             max_seq_len=arch.max_seq_len,
                             seed=config.seed,
                             min_seq_len=max(arch.filter_sizes) if arch.encoder == "cnn" else 1,
                             forbidden_domains=forbidden_domains)
    holdout = simulated_target.test_patients
    if len(holdout) > config.eval_patients:
        holdout = holdout[:config.eval_patients]
    eval_batch = make_batch(holdout, arch.vocab_size, arch.max_seq_len,
                            split="test",
                            min_seq_len=max(arch.filter_sizes) if arch.encoder == "cnn" else 1)
    eval_episode = None
    if config.eval_after_adaptation:
        # fixed adaptation batches for the whole run, drawn off to the side
        # so the training episode stream is unaffected
        eval_sampler = EpisodeSampler(
            sources, simulated_target, n_per_domain=config.n_per_domain,
            vocab_size=arch.vocab_size, max_seq_len=arch.max_seq_len,
            seed=config.seed + 0x5EED,
            min_seq_len=max(arch.filter_sizes) if arch.encoder == "cnn" else 1,
            forbidden_domains=forbidden_domains)
        eval_episode = eval_sampler.sample_episode()

    adam = Adam.from_config(config)
    history = TrainHistory()
    for iteration in range(config.max_iters):
        episode_batch = sampler.sample_episode_batch(config.episode_batch_size)
        try:
            params, record = meta_train_step(params, episode_batch, arch, config,
                                             adam, norm_state)
        except TrainingError as err:
            raise TrainingError(f"iteration {iteration}: {err}") from err
        eval_auroc, eval_f1 = _eval_holdout(params, eval_batch, arch, norm_state,
                                            config, eval_episode)
        history.append(iteration=iteration, **record,
                       eval_auroc=eval_auroc, eval_f1=eval_f1)
    return MetaTrainResult(params=params, norm_state=norm_state, history=history,
                           arch=arch, config=config)
