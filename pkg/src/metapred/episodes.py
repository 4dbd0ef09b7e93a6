"""Multi-domain dataset handling and episode construction.

An episode is one meta-learning sample: a class-balanced batch from every
source domain plus one from the simulated target domain. Patients from the
genuine target domain and from test splits never enter an episode.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .models import Batch

CASE, CONTROL = 1, 0


@dataclass(frozen=True)
class PatientRecord:
    """One patient: visit-wise code-group index sets within the observation
    window, in time order."""

    patient_id: str
    domain: str
    label: int
    age: int
    visits: tuple[tuple[int, ...], ...]
    visit_days: tuple[int, ...] | None = None
    window: tuple[int, int] | None = None

    def __post_init__(self):
        if self.label not in (CASE, CONTROL):
            raise ValueError(f"label must be 0/1, got {self.label}")
        if len(self.visits) == 0:
            raise ValueError(f"patient {self.patient_id} has no visits")
        if self.visit_days is not None:
            days = self.visit_days
            if len(days) != len(self.visits):
                raise ValueError("visit_days/visits length mismatch")
            if any(b <= a for a, b in zip(days, days[1:])):
                raise ValueError("visit days must be strictly increasing")
            if self.window is not None:
                lo, hi = self.window
                if any(not (lo <= d < hi) for d in days):
                    raise ValueError("visit outside the observation window")


class DatasetError(ValueError):
    pass


@dataclass
class DomainDataset:
    """Labeled case/control collection for one disease domain."""

    name: str
    patients: list[PatientRecord]
    train_idx: list[int] = field(default_factory=list)
    test_idx: list[int] = field(default_factory=list)

    def __post_init__(self):
        if self.train_idx or self.test_idx:
            self.validate_split()

    def validate_split(self):
        both = sorted(self.train_idx) + sorted(self.test_idx)
        if sorted(both) != list(range(len(self.patients))):
            raise DatasetError(f"{self.name}: splits must partition the patients")
        for side, idx in (("train", self.train_idx), ("test", self.test_idx)):
            labels = {self.patients[i].label for i in idx}
            if labels != {CASE, CONTROL}:
                raise DatasetError(
                    f"{self.name}: {side} split needs at least one case and "
                    f"one control")

    def subset(self, idx: Sequence[int]) -> list[PatientRecord]:
        return [self.patients[i] for i in idx]

    @property
    def train_patients(self) -> list[PatientRecord]:
        return self.subset(self.train_idx)

    @property
    def test_patients(self) -> list[PatientRecord]:
        return self.subset(self.test_idx)

    def label_counts(self) -> tuple[int, int]:
        labels = [p.label for p in self.patients]
        return labels.count(CASE), labels.count(CONTROL)


def split_train_test(domain: DomainDataset, test_fraction: float,
                     seed: int) -> DomainDataset:
    """Stratified split preserving the case/control ratio within +/- 1."""
    if not (0.0 < test_fraction < 1.0):
        raise DatasetError("test_fraction must be in (0, 1)")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5917]))
    train: list[int] = []
    test: list[int] = []
    for label in (CASE, CONTROL):
        idx = np.array([i for i, p in enumerate(domain.patients)
                        if p.label == label])
        n_test = int(round(test_fraction * idx.size))
        if n_test < 1 or idx.size - n_test < 1:
            raise DatasetError(
                f"{domain.name}: too few patients with label {label} "
                f"({idx.size}) to split at {test_fraction}")
        order = rng.permutation(idx.size)
        test.extend(int(i) for i in idx[order[:n_test]])
        train.extend(int(i) for i in idx[order[n_test:]])
    return DomainDataset(domain.name, domain.patients, sorted(train), sorted(test))


# --------------------------------------------------------------------------
# batching

def make_batch(patients: Sequence[PatientRecord], vocab_size: int,
               max_seq_len: int, split: str, min_seq_len: int = 1) -> Batch:
    """Pad patients to a common (T, S) grid; sequences longer than
    max_seq_len keep their most recent visits."""
    if not patients:
        raise DatasetError("empty batch")
    visits = [p.visits[-max_seq_len:] for p in patients]
    lengths = np.array([len(v) for v in visits], dtype=np.int64)
    t_pad = max(int(lengths.max()), min_seq_len)
    s_pad = max(max((len(vs) for v in visits for vs in v), default=1), 1)
    codes = np.zeros((len(patients), t_pad, s_pad), dtype=np.int32)
    for b, v in enumerate(visits):
        for t, vs in enumerate(v):
            row = sorted(vs)
            codes[b, t, :len(row)] = row
    labels = np.zeros((len(patients), 2), dtype=np.float64)
    for b, p in enumerate(patients):
        labels[b, p.label] = 1.0
    domains = {p.domain for p in patients}
    domain = domains.pop() if len(domains) == 1 else "mixed"
    return Batch(codes=codes, lengths=lengths, labels=labels, domain=domain,
                 split=split, patient_ids=tuple(p.patient_id for p in patients))


@dataclass(frozen=True)
class Episode:
    """Per-source batches plus one simulated-target batch."""

    source_batches: tuple[Batch, ...]
    target_batch: Batch

    @property
    def batches(self) -> tuple[Batch, ...]:
        return (*self.source_batches, self.target_batch)


class EpisodeSampler:
    """Draws episodes from source-domain and simulated-target train splits.

    Owns its RNG: one sampler per training run. Batches are class-balanced
    (ceil(n/2) cases, floor(n/2) controls), drawn uniformly without
    replacement within an episode and with replacement across episodes.
    """

    def __init__(self, sources: Sequence[DomainDataset],
                 simulated_target: DomainDataset, n_per_domain: int,
                 vocab_size: int, max_seq_len: int, seed: int,
                 min_seq_len: int = 1, forbidden_domains: Sequence[str] = ()):
        if n_per_domain < 1:
            raise DatasetError("n_per_domain must be >= 1")
        names = [d.name for d in (*sources, simulated_target)]
        if len(set(names)) != len(names):
            raise DatasetError(f"duplicate domains in episode pool: {names}")
        for banned in forbidden_domains:
            if banned in names:
                raise DatasetError(
                    f"domain {banned!r} must not appear in meta-training episodes")
        self.sources = list(sources)
        self.simulated_target = simulated_target
        self.n_per_domain = n_per_domain
        self.vocab_size = vocab_size
        self.max_seq_len = max_seq_len
        self.min_seq_len = min_seq_len
        self.rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xE915]))
        self._pools = {d.name: self._class_pools(d) for d in (*sources, simulated_target)}

    def _class_pools(self, domain: DomainDataset):
        n_cases = (self.n_per_domain + 1) // 2
        n_controls = self.n_per_domain // 2
        cases = [p for p in domain.train_patients if p.label == CASE]
        controls = [p for p in domain.train_patients if p.label == CONTROL]
        if len(cases) < n_cases or len(controls) < n_controls:
            raise DatasetError(
                f"domain {domain.name!r} train split too small for balanced "
                f"batches of {self.n_per_domain} ({len(cases)} cases, "
                f"{len(controls)} controls)")
        return cases, controls

    def _draw(self, domain_name: str) -> Batch:
        cases, controls = self._pools[domain_name]
        n_cases = (self.n_per_domain + 1) // 2
        n_controls = self.n_per_domain - n_cases
        picked = [cases[i] for i in self.rng.choice(len(cases), n_cases, replace=False)]
        if n_controls:
            picked += [controls[i] for i in
                       self.rng.choice(len(controls), n_controls, replace=False)]
        return make_batch(picked, self.vocab_size, self.max_seq_len,
                          split="train", min_seq_len=self.min_seq_len)

    def sample_episode(self) -> Episode:
        return Episode(
            source_batches=tuple(self._draw(d.name) for d in self.sources),
            target_batch=self._draw(self.simulated_target.name))

    def sample_episode_batch(self, batch_size: int) -> list[Episode]:
        if batch_size < 1:
            raise DatasetError("episode batch size must be >= 1")
        return [self.sample_episode() for _ in range(batch_size)]


def stratified_subset(patients: Sequence[PatientRecord], fraction: float,
                      seed: int) -> list[PatientRecord]:
    """Stratified fraction of a patient list, nested across fractions:
    under one seed the subset at 0.4 contains the subset at 0.2."""
    if not (0.0 < fraction <= 1.0):
        raise DatasetError("fraction must be in (0, 1]")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5B5]))
    picked: list[PatientRecord] = []
    for label in (CASE, CONTROL):
        group = [p for p in patients if p.label == label]
        order = rng.permutation(len(group))
        take = int(np.ceil(fraction * len(group)))
        picked.extend(group[i] for i in order[:take])
    return sorted(picked, key=lambda p: p.patient_id)
