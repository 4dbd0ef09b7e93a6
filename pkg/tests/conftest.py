import numpy as np
import pytest

from metapred.episodes import DomainDataset, PatientRecord, split_train_test
from metapred.models import Architecture


def tiny_arch(encoder="cnn", **overrides) -> Architecture:
    base = dict(encoder=encoder, vocab_size=10, embed_dim=4,
                filter_sizes=(2, 3), filters_per_size=2, mlp_hidden=(6,),
                max_seq_len=5, dtype="float64")
    base.update(overrides)
    return Architecture(**base)


def toy_patient(pid, domain, label, rng, n_visits=4, vocab=10, codes_per_visit=2):
    visits = []
    for _ in range(n_visits):
        k = int(rng.integers(1, codes_per_visit + 1))
        visits.append(tuple(sorted(int(c) for c in rng.integers(1, vocab, size=k))))
    return PatientRecord(patient_id=pid, domain=domain, label=label,
                         age=int(rng.integers(55, 90)), visits=tuple(visits))


def toy_domain(name, n_cases=20, n_controls=20, seed=0, vocab=10,
               case_code=None, control_code=None, n_visits=4,
               test_fraction=0.25) -> DomainDataset:
    """Small synthetic domain; case/control marker codes make it separable."""
    rng = np.random.default_rng(seed)
    patients = []
    for i in range(n_cases + n_controls):
        label = 1 if i < n_cases else 0
        p = toy_patient(f"{name}-{i}", name, label, rng, n_visits=n_visits,
                        vocab=vocab)
        marker = case_code if label == 1 else control_code
        if marker is not None:
            visits = tuple(tuple(sorted(set(v) | {marker})) for v in p.visits)
            p = PatientRecord(p.patient_id, p.domain, p.label, p.age, visits)
        patients.append(p)
    return split_train_test(DomainDataset(name, patients), test_fraction, seed)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
