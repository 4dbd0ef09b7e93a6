"""Evaluation metrics and multi-run aggregation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class MetricError(ValueError):
    pass


def auroc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Probability that a random positive outscores a random negative,
    ties counted 1/2 (Mann-Whitney, computed via average ranks)."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1 or s.size == 0:
        raise MetricError("scores and labels must be equal-length 1-D")
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise MetricError("AUROC needs both classes present")
    order = np.argsort(s, kind="stable")
    ranks = np.empty(s.size, dtype=np.float64)
    ranks[order] = np.arange(1, s.size + 1)
    # average ranks over tied groups
    sorted_s = s[order]
    i = 0
    while i < s.size:
        j = i
        while j + 1 < s.size and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        if j > i:
            ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    rank_sum_pos = ranks[y == 1].sum()
    return float((rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def f1(predictions: Sequence[int], labels: Sequence[int]) -> float:
    """Harmonic mean of precision and recall on the positive class;
    degenerate cases return 0."""
    p = np.asarray(predictions)
    y = np.asarray(labels)
    if p.shape != y.shape or p.size == 0:
        raise MetricError("predictions and labels must be equal-length, nonempty")
    tp = int(((p == 1) & (y == 1)).sum())
    fp = int(((p == 1) & (y == 0)).sum())
    fn = int(((p == 0) & (y == 1)).sum())
    if 2 * tp + fp + fn == 0:
        return 0.0
    return float(2 * tp / (2 * tp + fp + fn))


def scores_to_predictions(scores: Sequence[float], threshold: float = 0.5) -> np.ndarray:
    return (np.asarray(scores, dtype=np.float64) >= threshold).astype(np.int64)


@dataclass(frozen=True)
class RunResult:
    method: str
    target: str
    rho: float
    seed: int
    auroc: float
    f1: float

    def __post_init__(self):
        if not (0.0 <= self.auroc <= 1.0 and 0.0 <= self.f1 <= 1.0):
            raise MetricError(f"metrics out of [0,1]: {self}")

    def row(self) -> str:
        return (f"{self.method},{self.target},{self.rho:g},{self.seed},"
                f"{self.auroc:.6f},{self.f1:.6f}")

    @staticmethod
    def header() -> str:
        return "method,target,rho,seed,auroc,f1"

    @classmethod
    def parse(cls, line: str) -> "RunResult":
        method, target, rho, seed, a, f = line.strip().split(",")
        return cls(method, target, float(rho), int(seed), float(a), float(f))


@dataclass(frozen=True)
class Aggregate:
    method: str
    target: str
    rho: float
    n_runs: int
    auroc_mean: float
    auroc_std: float
    f1_mean: float
    f1_std: float

    def formatted(self) -> tuple[str, str]:
        """Table-style cells: '0.7876 (.02)'."""
        def fmt(mean, std):
            return f"{mean:.4f} ({std:.2f}".replace("(0.", "(.") + ")"
        return fmt(self.auroc_mean, self.auroc_std), fmt(self.f1_mean, self.f1_std)


def aggregate_runs(results: Iterable[RunResult]) -> list[Aggregate]:
    """Mean and sample standard deviation per (method, target, rho)."""
    groups: dict[tuple[str, str, float], list[RunResult]] = {}
    for r in results:
        groups.setdefault((r.method, r.target, r.rho), []).append(r)
    if not groups:
        raise MetricError("no runs to aggregate")
    out = []
    for (method, target, rho), runs in sorted(groups.items()):
        aurocs = np.array([r.auroc for r in runs])
        f1s = np.array([r.f1 for r in runs])
        ddof = 1 if len(runs) > 1 else 0
        out.append(Aggregate(
            method, target, rho, len(runs),
            float(aurocs.mean()), float(aurocs.std(ddof=ddof)),
            float(f1s.mean()), float(f1s.std(ddof=ddof))))
    return out


def aggregate_table(aggregates: Sequence[Aggregate]) -> str:
    """Aligned-text table, methods as rows, AUROC/F1 as columns."""
    header = f"{'method':<24} {'target':<14} {'rho':>5} {'n':>3} {'AUROC':>14} {'F1':>14}"
    lines = [header, "-" * len(header)]
    for a in aggregates:
        cell_a, cell_f = a.formatted()
        lines.append(f"{a.method:<24} {a.target:<14} {a.rho:>5g} {a.n_runs:>3} "
                     f"{cell_a:>14} {cell_f:>14}")
    return "\n".join(lines) + "\n"
