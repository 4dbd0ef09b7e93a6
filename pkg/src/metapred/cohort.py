"""Synthetic multi-domain longitudinal cohort generator.

Stands in for a private clinical corpus: raw timestamped diagnosis streams
are generated per domain, then pushed through the real cohort-construction
rules (code grouping, case/control labeling with observation and prediction
windows, age matching), so the whole pipeline is exercised end to end.

Generative mechanics (invented, calibrated only to public scale statistics:
domain sizes in the hundreds-to-thousands, ~20 visits per patient): each
domain's cases express a signature over code groups, composed of a component
shared by all domains plus a domain-specific perturbation scaled by
`domain_shift`. At zero shift every domain shares one signature and transfer
is easy; growing shift suppresses/replaces shared groups per domain and
makes transfer monotonically harder.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .episodes import CASE, CONTROL, DomainDataset, PatientRecord

DAYS_PER_YEAR = 365


class CohortError(ValueError):
    pass


# --------------------------------------------------------------------------
# diagnosis-code grouping and the disease registry

_CODE_RE = re.compile(r"^(\d{3}|V\d{2}|E\d{3})(\.\d{1,2})?$")


def icd9_group(code: str) -> str:
    """Collapse a diagnosis code to its family: characters before the
    decimal point (three for numeric and V codes, four for E codes).
    Idempotent on group codes."""
    code = code.strip()
    m = _CODE_RE.match(code)
    if m is None:
        raise CohortError(f"malformed diagnosis code {code!r}")
    return m.group(1)


@dataclass(frozen=True)
class DiseaseRegistry:
    """Disease name -> diagnosis code patterns. A pattern is either an
    exact code ("331.83") or a wildcard group ("332.*") meaning every code
    in that group."""

    patterns: Mapping[str, tuple[str, ...]]

    def __post_init__(self):
        exact: dict[str, frozenset[str]] = {}
        wild: dict[str, frozenset[str]] = {}
        for disease, pats in self.patterns.items():
            ex, wi = set(), set()
            for p in pats:
                if p.endswith(".*"):
                    wi.add(icd9_group(p[:-2]))
                else:
                    icd9_group(p)  # validates syntax
                    ex.add(p)
            exact[disease] = frozenset(ex)
            wild[disease] = frozenset(wi)
        object.__setattr__(self, "_exact", exact)
        object.__setattr__(self, "_wild", wild)

    def diseases(self) -> list[str]:
        return list(self.patterns)

    def matches(self, disease: str, code: str) -> bool:
        if disease not in self.patterns:
            raise CohortError(f"unknown disease {disease!r}")
        return code in self._exact[disease] or \
            icd9_group(code) in self._wild[disease]

    def groups(self) -> frozenset[str]:
        """Every group touched by any pattern of any disease."""
        out = set()
        for disease in self.patterns:
            out |= {icd9_group(c) for c in self._exact[disease]}
            out |= self._wild[disease]
        return frozenset(out)

    def sample_code(self, disease: str, rng) -> str:
        pattern = self.patterns[disease][int(rng.integers(len(self.patterns[disease])))]
        if pattern.endswith(".*"):
            return f"{pattern[:-2]}.{int(rng.integers(10))}"
        return pattern


def cognitive_registry() -> DiseaseRegistry:
    """Cognition-related disorders with their diagnosis-code families."""
    return DiseaseRegistry({
        "mci": ("331.83", "331.89", "331.9"),
        "alzheimers": ("331.0", "331.2", "331.6", "331.7"),
        "parkinsons": ("332.*",),
        "dementia": ("290.*", "291.*", "294.*", "331.82"),
        "amnesia": ("780.93",),
        "huntingtons": ("333.4",),
        "mechanical_obstructions": ("331.3", "331.4", "331.5"),
        "frontotemporal_dementia": ("331.1", "331.11", "331.19"),
    })


DEFAULT_DOMAINS = ("mci", "alzheimers", "parkinsons", "dementia", "amnesia")


# --------------------------------------------------------------------------
# cohort-construction rules

@dataclass(frozen=True)
class LabelResult:
    label: int
    window: tuple[int, int]   # [start, end) in days


def label_patient(stream: Sequence[tuple[int, str]], registry: DiseaseRegistry,
                  disease: str, observation_years: float = 2.0,
                  prediction_gap_years: float = 0.5,
                  rng=None) -> LabelResult | None:
    """Label a raw diagnosis stream for one disease, or None if ineligible.

    Cases: any registry code for the disease occurring after the
    observation window plus the prediction gap; the window ends gap-years
    before the first qualifying diagnosis. Controls: no qualifying code at
    all, but at least one other cognitive-disorder code; their window ends
    gap-years before an index date drawn uniformly over the eligible part
    of the recorded history.
    """
    if not stream:
        return None
    events = sorted((int(day), code) for day, code in stream)
    obs = int(round(observation_years * DAYS_PER_YEAR))
    gap = int(round(prediction_gap_years * DAYS_PER_YEAR))
    days = np.array([d for d, _ in events])
    first_day, last_day = int(days[0]), int(days[-1])

    qualifying = [d for d, code in events if registry.matches(disease, code)]
    if qualifying:
        anchor = min(qualifying)
        start, end = anchor - gap - obs, anchor - gap
        if start < first_day:
            return None  # history too short for the window plus the gap
        if not np.any((days >= start) & (days < end)):
            return None
        return LabelResult(CASE, (start, end))

    has_other = any(
        registry.matches(other, code)
        for _, code in events
        for other in registry.patterns if other != disease)
    if not has_other:
        return None

    lo = first_day + obs + gap
    if lo > last_day:
        return None  # recorded history shorter than window plus gap
    candidates = np.arange(lo, last_day + 1)
    starts = candidates - gap - obs
    ends = candidates - gap
    counts = np.searchsorted(days, ends, side="left") - \
        np.searchsorted(days, starts, side="left")
    feasible = candidates[counts > 0]
    if feasible.size == 0:
        return None
    rng = rng if rng is not None else np.random.default_rng(0)
    index_date = int(feasible[int(rng.integers(feasible.size))])
    return LabelResult(CONTROL, (index_date - gap - obs, index_date - gap))


def age_match(cases: Sequence, controls: Sequence, tolerance_years: int = 5,
              rng=None, ratio: float = 1.0) -> list:
    """Greedy nearest-age matching: every retained control lies within the
    tolerance of some case; up to ratio * len(cases) controls are kept.
    Raises listing the cases with no in-tolerance control in the pool."""
    if not cases or not controls:
        raise CohortError("age matching needs nonempty case and control pools")
    rng = rng if rng is not None else np.random.default_rng(0)
    case_ages = np.array([c.age for c in cases], dtype=np.int64)
    ctrl_ages = np.array([c.age for c in controls], dtype=np.int64)

    gaps_full = np.abs(ctrl_ages[None, :] - case_ages[:, None])
    unmatched = [cases[i] for i in range(len(cases))
                 if gaps_full[i].min() > tolerance_years]
    if unmatched:
        ids = [getattr(c, "patient_id", repr(c)) for c in unmatched]
        raise CohortError(f"no control within {tolerance_years} years of "
                          f"cases: {ids[:10]}")

    available = np.ones(len(controls), dtype=bool)
    target = int(round(ratio * len(cases)))
    retained: list = []
    case_order = rng.permutation(len(cases))
    progress = True
    while len(retained) < target and progress:
        progress = False
        for ci in case_order:
            if len(retained) >= target:
                break
            gaps = gaps_full[ci].astype(np.float64)
            gaps[~available] = np.inf
            j = int(np.argmin(gaps))
            if gaps[j] <= tolerance_years:
                available[j] = False
                retained.append(controls[j])
                progress = True
    return retained


# --------------------------------------------------------------------------
# the generator

@dataclass(frozen=True)
class CohortSpec:
    domains: tuple[str, ...] = DEFAULT_DOMAINS
    cases_per_domain: int = 400
    controls_per_domain: int = 400
    vocab_groups: int = 1016          # code groups, excluding the padding index
    mean_visits: float = 20.0
    shared_signal: float = 0.6        # case-signature intensity of the shared part
    domain_shift: float = 0.5         # scale of the domain-specific perturbation
    label_noise: float = 0.0
    observation_years: float = 2.0
    prediction_gap_years: float = 0.5
    background_codes_per_visit: float = 2.5
    n_shared_groups: int = 12
    n_specific_groups: int = 12
    expression_rate: float = 0.5      # per-patient fraction of the signature expressed
    shift_profile: tuple[float, ...] | None = None  # per-domain multipliers on domain_shift
    seed: int = 0

    def __post_init__(self):
        if len(self.domains) < 2:
            raise CohortError("a cohort needs at least two domains")
        if self.cases_per_domain < 1 or self.controls_per_domain < 1:
            raise CohortError("per-domain counts must be positive")
        if self.domain_shift < 0:
            raise CohortError("domain_shift must be >= 0")
        if not (0.0 <= self.label_noise < 0.5):
            raise CohortError("label_noise must be in [0, 0.5)")
        if not (0.0 < self.expression_rate <= 1.0):
            raise CohortError("expression_rate must be in (0, 1]")
        if self.shift_profile is not None:
            if len(self.shift_profile) != len(self.domains):
                raise CohortError(
                    "shift_profile needs one multiplier per domain")
            if any(m < 0 for m in self.shift_profile):
                raise CohortError("shift_profile multipliers must be >= 0")
        if self.mean_visits < 2:
            raise CohortError("mean_visits must be >= 2")

    @property
    def vocab_size(self) -> int:
        return self.vocab_groups + 1  # plus padding index 0

    def to_dict(self) -> dict:
        return {
            "domains": list(self.domains),
            "cases_per_domain": self.cases_per_domain,
            "controls_per_domain": self.controls_per_domain,
            "vocab_groups": self.vocab_groups, "mean_visits": self.mean_visits,
            "shared_signal": self.shared_signal, "domain_shift": self.domain_shift,
            "label_noise": self.label_noise,
            "observation_years": self.observation_years,
            "prediction_gap_years": self.prediction_gap_years,
            "background_codes_per_visit": self.background_codes_per_visit,
            "n_shared_groups": self.n_shared_groups,
            "n_specific_groups": self.n_specific_groups,
            "expression_rate": self.expression_rate,
            "shift_profile": (list(self.shift_profile)
                              if self.shift_profile is not None else None),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "CohortSpec":
        d = dict(d)
        if "domains" in d:
            d["domains"] = tuple(d["domains"])
        if d.get("shift_profile") is not None:
            d["shift_profile"] = tuple(d["shift_profile"])
        return cls(**d)


def group_universe(n_groups: int, registry: DiseaseRegistry) -> list[str]:
    """Registry groups first (always representable), then numeric, V and E
    filler groups up to n_groups."""
    reserved = sorted(registry.groups())
    fillers = [f"{i:03d}" for i in range(1, 1000)]
    fillers += [f"V{i:02d}" for i in range(100)]
    fillers += [f"E{i}" for i in range(800, 1000)]
    out = list(reserved)
    for g in fillers:
        if len(out) >= n_groups:
            break
        if g not in registry.groups():
            out.append(g)
    if len(out) < n_groups:
        raise CohortError(f"cannot build {n_groups} distinct code groups")
    return out


def _raw_code_for_group(group: str, rng) -> str:
    return f"{group}.{int(rng.integers(10))}"


@dataclass
class _DomainPlan:
    disease: str
    signature_groups: list[str]        # shared then domain-specific
    intensities: np.ndarray            # per signature group, pre-ramp
    background: list[str]              # non-registry groups


def _domain_plans(spec: CohortSpec, registry: DiseaseRegistry,
                  universe: Sequence[str]) -> dict[str, _DomainPlan]:
    reserved = registry.groups()
    eligible = [g for g in universe if g not in reserved]
    need = spec.n_shared_groups + spec.n_specific_groups * len(spec.domains)
    if len(eligible) < need + 8:
        raise CohortError(
            f"vocab_groups={spec.vocab_groups} too small for the signature "
            f"layout (needs >= {need + 8 + len(reserved)})")
    layout_rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0x51D]))
    order = layout_rng.permutation(len(eligible))
    shared = [eligible[i] for i in order[:spec.n_shared_groups]]
    plans: dict[str, _DomainPlan] = {}
    cursor = spec.n_shared_groups
    for idx, disease in enumerate(spec.domains):
        if disease not in registry.patterns:
            raise CohortError(f"domain {disease!r} not in the registry")
        specific = [eligible[i] for i in order[cursor:cursor + spec.n_specific_groups]]
        cursor += spec.n_specific_groups
        sig_rng = np.random.default_rng(
            np.random.SeedSequence([spec.seed, 0xD15EA5E, idx]))
        # shared component + shift-scaled domain-specific component,
        # normalized so overall signature strength stays comparable across
        # shift values: the shared fraction of the case evidence decays as
        # 1 / (1 + shift). A shift profile makes the shifts heterogeneous
        # across domains (multiplier per domain, in spec.domains order).
        shift = spec.domain_shift
        if spec.shift_profile is not None:
            shift = spec.domain_shift * spec.shift_profile[idx]
        shared_part = np.concatenate([
            np.full(len(shared), spec.shared_signal),
            np.zeros(len(specific)),
        ])
        specific_part = np.concatenate([
            np.zeros(len(shared)),
            spec.shared_signal * sig_rng.uniform(0.8, 1.6, size=len(specific)),
        ])
        intensity = np.clip(
            (shared_part + shift * specific_part) / (1.0 + shift),
            0.0, 0.95)
        plans[disease] = _DomainPlan(
            disease=disease,
            signature_groups=shared + specific,
            intensities=intensity,
            # background spans every non-registry group, signature groups
            # included, so signature codes also occur as noise in controls
            background=eligible,
        )
    return plans


def _make_stream(plan: _DomainPlan, spec: CohortSpec, registry: DiseaseRegistry,
                 label: int, age: int, rng) -> list[tuple[int, str]]:
    """One raw diagnosis stream.

    Timeline: an intake event at day 0; feature visits inside the planned
    window [j, j + obs); at day j + obs + gap either the qualifying
    diagnosis (cases) or a final checkup (controls).
    """
    obs = int(round(spec.observation_years * DAYS_PER_YEAR))
    gap = int(round(spec.prediction_gap_years * DAYS_PER_YEAR))
    j = int(rng.integers(1, 6))
    n_visits = max(2, int(rng.poisson(spec.mean_visits)))
    n_visits = min(n_visits, obs - 4)
    visit_days = np.sort(rng.choice(np.arange(j + 1, j + obs - 1), size=n_visits,
                                    replace=False))

    bg = plan.background
    events: list[tuple[int, str]] = []
    events.append((0, _raw_code_for_group(bg[int(rng.integers(len(bg)))], rng)))

    ramp = 0.3 + 0.7 * (visit_days - j) / obs
    if label == CASE:
        # each patient expresses a random subset of the disease signature
        expressed = rng.random(len(plan.signature_groups)) < spec.expression_rate
        rates = plan.intensities * expressed
        hits = rng.random((n_visits, len(plan.signature_groups))) < \
            rates[None, :] * ramp[:, None]
    else:
        hits = np.zeros((n_visits, len(plan.signature_groups)), dtype=bool)

    for vi, day in enumerate(visit_days):
        n_bg = 1 + int(rng.poisson(max(spec.background_codes_per_visit - 1, 0.1)))
        for _ in range(n_bg):
            events.append((int(day), _raw_code_for_group(
                bg[int(rng.integers(len(bg)))], rng)))
        for gi in np.nonzero(hits[vi])[0]:
            events.append((int(day), _raw_code_for_group(
                plan.signature_groups[gi], rng)))

    # comorbid cognitive marker: controls always carry one, cases sometimes
    if label == CONTROL or rng.random() < 0.5:
        others = [d for d in registry.patterns if d != plan.disease]
        while True:
            marker = registry.sample_code(others[int(rng.integers(len(others)))], rng)
            if not registry.matches(plan.disease, marker):
                break
        marker_day = int(visit_days[int(rng.integers(n_visits))])
        events.append((marker_day, marker))

    terminal_day = j + obs + gap
    if label == CASE:
        events.append((terminal_day, registry.sample_code(plan.disease, rng)))
    else:
        events.append((terminal_day, _raw_code_for_group(
            bg[int(rng.integers(len(bg)))], rng)))
    return events


@dataclass
class _Candidate:
    patient_id: str
    age: int
    label: int
    window: tuple[int, int]
    stream: list[tuple[int, str]]


def _windowed_record(cand: _Candidate, domain: str, label: int,
                     group_index: Mapping[str, int]) -> PatientRecord:
    start, end = cand.window
    by_day: dict[int, set[int]] = {}
    for day, code in cand.stream:
        if start <= day < end:
            by_day.setdefault(day, set()).add(group_index[icd9_group(code)])
    days = sorted(by_day)
    if not days:
        raise CohortError(f"{cand.patient_id}: empty observation window")
    return PatientRecord(
        patient_id=cand.patient_id, domain=domain, label=label, age=cand.age,
        visits=tuple(tuple(sorted(by_day[d])) for d in days),
        visit_days=tuple(d - start for d in days),
        window=(0, end - start))


def generate_cohort(spec: CohortSpec,
                    registry: DiseaseRegistry | None = None
                    ) -> list[DomainDataset]:
    """Generate one DomainDataset per configured domain (unsplit).

    Raw streams pass through label_patient and age_match, so window
    semantics and leakage-freedom hold by construction and are re-checked
    here. Deterministic under spec.seed, byte for byte.
    """
    registry = registry if registry is not None else cognitive_registry()
    universe = group_universe(spec.vocab_groups, registry)
    group_index = {g: i + 1 for i, g in enumerate(universe)}  # 0 = padding
    plans = _domain_plans(spec, registry, universe)

    datasets: list[DomainDataset] = []
    for dom_idx, disease in enumerate(spec.domains):
        plan = plans[disease]
        gen_rng = np.random.default_rng(
            np.random.SeedSequence([spec.seed, 0xC0, dom_idx]))
        label_rng = np.random.default_rng(
            np.random.SeedSequence([spec.seed, 0x1A, dom_idx]))
        match_rng = np.random.default_rng(
            np.random.SeedSequence([spec.seed, 0xA6, dom_idx]))
        noise_rng = np.random.default_rng(
            np.random.SeedSequence([spec.seed, 0x40, dom_idx]))

        def build(label: int, count: int, tag: str,
                  anchor_ages: Sequence[int] | None = None) -> list[_Candidate]:
            out = []
            attempts = 0
            while len(out) < count:
                attempts += 1
                if attempts > 20 * count + 100:
                    raise CohortError(
                        f"{disease}: could not generate {count} eligible "
                        f"{tag} patients")
                if anchor_ages is None:
                    age = int(np.clip(round(gen_rng.normal(74, 6)), 55, 95))
                else:
                    # matched recruitment: control ages track the case pool
                    near = anchor_ages[len(out) % len(anchor_ages)]
                    age = int(np.clip(near + gen_rng.integers(-4, 5), 55, 95))
                stream = _make_stream(plan, spec, registry, label, age, gen_rng)
                result = label_patient(stream, registry, disease,
                                       spec.observation_years,
                                       spec.prediction_gap_years, rng=label_rng)
                if result is None or result.label != label:
                    raise CohortError(
                        f"{disease}: generated stream mislabeled "
                        f"(expected {label}, got {result})")
                for day, code in stream:
                    if (result.window[0] <= day < result.window[1]
                            and registry.matches(disease, code)):
                        raise CohortError(
                            f"{disease}: qualifying diagnosis inside the "
                            f"observation window")
                n_window = len({d for d, _ in stream
                                if result.window[0] <= d < result.window[1]})
                if n_window < 2:
                    continue
                out.append(_Candidate(
                    patient_id=f"{disease}-{tag}-{len(out):05d}", age=age,
                    label=label, window=result.window, stream=stream))
            return out

        cases = build(CASE, spec.cases_per_domain, "case")
        surplus = int(np.ceil(spec.controls_per_domain * 1.25)) + 4
        control_pool = build(CONTROL, surplus, "ctrl",
                             anchor_ages=[c.age for c in cases])
        ratio = spec.controls_per_domain / spec.cases_per_domain
        matched = age_match(cases, control_pool, tolerance_years=5,
                            rng=match_rng, ratio=ratio * 1.1)
        if len(matched) < spec.controls_per_domain:
            raise CohortError(
                f"{disease}: age matching kept {len(matched)} controls, "
                f"needed {spec.controls_per_domain}")
        controls = sorted(matched, key=lambda c: c.patient_id)[
            :spec.controls_per_domain]

        records = []
        for cand in (*cases, *controls):
            label = cand.label
            if spec.label_noise > 0 and noise_rng.random() < spec.label_noise:
                label = 1 - label
            records.append(_windowed_record(cand, disease, label, group_index))
        records.sort(key=lambda r: r.patient_id)
        datasets.append(DomainDataset(disease, records))
    return datasets


def leakage_audit(spec: CohortSpec,
                  registry: DiseaseRegistry | None = None) -> int:
    """Regenerate the cohort while asserting, patient by patient on the raw
    streams, that no qualifying diagnosis falls inside an observation
    window (generate_cohort raises on any violation). Additionally checks
    the windowed records against the wildcard disease groups. Returns the
    number of patients audited."""
    registry = registry if registry is not None else cognitive_registry()
    datasets = generate_cohort(spec, registry)
    universe = group_universe(spec.vocab_groups, registry)
    index_to_group = {i + 1: g for i, g in enumerate(universe)}
    checked = 0
    for ds in datasets:
        wild = {icd9_group(p[:-2]) for p in registry.patterns[ds.name]
                if p.endswith(".*")}
        for rec in ds.patients:
            checked += 1
            for visit in rec.visits:
                groups = {index_to_group[idx] for idx in visit}
                if groups & wild:
                    raise CohortError(
                        f"{rec.patient_id}: qualifying group inside the "
                        f"observation window")
    return checked


# --------------------------------------------------------------------------
# dataset files

def save_cohort(datasets: Sequence[DomainDataset], path: str,
                spec: CohortSpec) -> None:
    """Line-delimited JSON (one patient per line) plus a sidecar manifest."""
    lines = []
    for ds in sorted(datasets, key=lambda d: d.name):
        for p in ds.patients:
            lines.append(json.dumps({
                "id": p.patient_id, "domain": p.domain, "label": p.label,
                "age": p.age, "visits": [list(v) for v in p.visits],
            }, sort_keys=True))
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)
    manifest = {
        "domains": sorted(d.name for d in datasets),
        "vocab_size": spec.vocab_size,
        "n_patients": sum(len(d.patients) for d in datasets),
        "seed": spec.seed,
        "spec": spec.to_dict(),
    }
    tmp = path + ".manifest.json.tmp"
    with open(tmp, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, sidecar_path(path))


def sidecar_path(path: str) -> str:
    return path + ".manifest.json"


def load_cohort(path: str) -> tuple[list[DomainDataset], dict]:
    """Read a dataset file and its sidecar manifest."""
    with open(sidecar_path(path)) as fh:
        manifest = json.load(fh)
    by_domain: dict[str, list[PatientRecord]] = {}
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            visits = tuple(tuple(int(c) for c in v) for v in row["visits"])
            rec = PatientRecord(
                patient_id=row["id"], domain=row["domain"],
                label=int(row["label"]), age=int(row["age"]), visits=visits)
            by_domain.setdefault(rec.domain, []).append(rec)
    datasets = [DomainDataset(name, sorted(patients, key=lambda p: p.patient_id))
                for name, patients in sorted(by_domain.items())]
    return datasets, manifest
