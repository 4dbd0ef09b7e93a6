"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Criteria 6-8 drive the real CLI on synthetic five-domain cohorts (the
heavyweight fixtures are session-scoped and shared); the rest check the
library surfaces directly against independent oracles.
"""

import json
import time

import numpy as np
import pytest

from metapred import autodiff as ad
from metapred.cli import main
from metapred.cohort import CohortSpec, generate_cohort, leakage_audit
from metapred.episodes import EpisodeSampler, split_train_test
from metapred.evaluation import FineTuneConfig, default_frozen, fine_tune
from metapred.metrics import RunResult, auroc, f1
from metapred.models import batch_loss, init_params
from metapred.training import Adam, MetaConfig, inner_adapt, meta_gradient, \
    meta_gradient_on_losses, meta_objective

from conftest import tiny_arch, toy_domain
from test_metrics import brute_force_auroc
from test_training import quad_loss, quad_params, straight_line_maml_grad

pytestmark = pytest.mark.slow


def report(num: int, ok: bool, detail: str):
    line = f"criterion {num}: {'PASS' if ok else 'FAIL'} — {detail}"
    print(line)
    assert ok, line


# --------------------------------------------------------------------------
# experiment fixtures (criteria 6-8)

DOMAINS = ["mci", "alzheimers", "parkinsons", "dementia", "amnesia"]

COHORT_BASE = {
    "domains": DOMAINS,
    "cases_per_domain": 400, "controls_per_domain": 400,
    "vocab_groups": 300, "mean_visits": 20.0,
    "shared_signal": 0.12, "expression_rate": 0.45,
    "background_codes_per_visit": 3.5,
    "label_noise": 0.05,
}

ARCH = {
    "encoder": "cnn", "vocab_size": 301, "embed_dim": 32,
    "filter_sizes": [2, 3], "filters_per_size": 16,
    "mlp_hidden": [32], "max_seq_len": 20,
}

SEEDS = [0, 1, 2, 3, 4]
RHO_GRID = [0.2, 0.4, 0.6, 0.8, 1.0]


def _manifest(cohort: dict, meta: dict, out: str) -> dict:
    return {
        "dataset": {"path": "cohort.jsonl", "generate": cohort},
        "domains": {"sources": ["dementia", "amnesia", "parkinsons"],
                    "simulated_target": "mci", "target": "alzheimers"},
        "arch": ARCH,
        "meta": meta,
        "finetune": {"fractions": RHO_GRID, "lr": 0.002, "epochs": 25,
                     "batch_size": 32},
        "baselines": {"methods": ["cnn", "translearn", "multilearn"],
                      "fit": {"lr": 0.002, "epochs": 25, "batch_size": 32}},
        "seeds": SEEDS,
        "test_fraction": 0.2,
        "out_dir": out,
    }


# five domains at shift scale 0.5 (criteria 6, 7, 10); the profile keeps
# the mean multiplier at 1 and puts the simulated and genuine targets
# nearest the shared structure, mirroring the deliberate closest-domain
# pairing of the evaluation design
LOWSHIFT = _manifest(
    {**COHORT_BASE, "domain_shift": 0.5,
     "shift_profile": [0.6, 0.4, 1.4, 1.2, 1.4], "seed": 600},
    {"inner_lr": 0.05, "meta_lr": 0.002, "source_weight": 0.5,
     "inner_steps": 2, "episode_batch_size": 8, "n_per_domain": 8,
     "max_iters": 150, "eval_patients": 160},
    "out")

# heterogeneous per-domain shifts around 1.0 with the simulated target as
# the near-shared domain, and small noisy episode batches (criterion 8)
HIGHSHIFT = _manifest(
    {**COHORT_BASE, "domain_shift": 1.0,
     "shift_profile": [0.2, 1.0, 1.4, 1.2, 1.6], "seed": 800},
    {"inner_lr": 0.01, "meta_lr": 0.002, "source_weight": 0.5,
     "inner_steps": 1, "episode_batch_size": 2, "n_per_domain": 8,
     "max_iters": 120, "eval_patients": 160},
    "out")


def _rows(path: str) -> list[RunResult]:
    with open(path) as fh:
        return [RunResult.parse(line) for line in fh.read().splitlines()[1:]]


def _mean(rows, method, rho, key):
    vals = [getattr(r, key) for r in rows
            if r.method == method and abs(r.rho - rho) < 1e-9]
    assert len(vals) == len(SEEDS), (method, rho, len(vals))
    return float(np.mean(vals))


@pytest.fixture(scope="session")
def lowshift_runs(tmp_path_factory):
    """Criteria 6, 7, 10: full pipeline on the shift-0.5 cohort."""
    root = tmp_path_factory.mktemp("accept6")
    manifest_path = root / "manifest.json"
    manifest_path.write_text(json.dumps(LOWSHIFT))
    started = time.time()
    for cmd in ("generate", "train-meta", "finetune", "train-baseline"):
        assert main([cmd, "--manifest", str(manifest_path), "--jobs", "3"]) == 0
    elapsed = time.time() - started
    results = root / "out" / "results"
    return {
        "root": root,
        "manifest": str(manifest_path),
        "elapsed": elapsed,
        "finetune": _rows(str(results / "metapred_finetune.csv")),
        "baselines": _rows(str(results / "baselines.csv")),
    }


@pytest.fixture(scope="session")
def highshift_ablation(tmp_path_factory):
    """Criterion 8: source-term ablation on the heterogeneous-shift cohort."""
    root = tmp_path_factory.mktemp("accept8")
    manifest_path = root / "manifest.json"
    manifest_path.write_text(json.dumps(HIGHSHIFT))
    assert main(["generate", "--manifest", str(manifest_path)]) == 0
    assert main(["ablate-mu", "--manifest", str(manifest_path),
                 "--jobs", "3"]) == 0
    curves: dict[tuple[str, int], list[dict]] = {}
    with open(root / "out" / "ablate" / "curves.csv") as fh:
        header = fh.readline().strip().split(",")
        for line in fh:
            vals = dict(zip(header, line.strip().split(",")))
            key = (vals["variant"], int(vals["seed"]))
            curves.setdefault(key, []).append(
                {k: float(v) for k, v in vals.items()
                 if k not in ("variant", "seed")})
    return curves


# --------------------------------------------------------------------------
# criterion 1: gradient oracle suite on tiny CNN and LSTM learners

def test_criterion_1_gradient_oracle_suite():
    started = time.time()
    worst = 0.0
    for encoder in ("cnn", "lstm"):
        arch = tiny_arch(encoder)  # d=4, vocab 10, T<=5, float64
        params = init_params(arch, 42)
        dom = toy_domain("d", 4, 4, seed=9, vocab=10, n_visits=5)
        from metapred.episodes import make_batch
        batch = make_batch(dom.patients[:4], 10, 5, split="train",
                           min_seq_len=3)

        def loss_fn(p):
            return batch_loss(batch, p, arch, mode="train")

        grads = ad.gradient(loss_fn(params), params)
        oracle = ad.finite_difference_oracle(
            lambda p: loss_fn(p).item(), params, epsilon=1e-6)
        for name in params:
            denom = max(np.abs(oracle[name]).max(), 1e-3)
            err = np.abs(grads[name].value - oracle[name]).max() / denom
            worst = max(worst, err)
    elapsed = time.time() - started
    report(1, worst < 1e-3 and elapsed < 60,
           f"CNN+LSTM loss gradients vs central differences: worst rel err "
           f"{worst:.2e} (tol 1e-3), {elapsed:.1f}s (< 60s)")


# --------------------------------------------------------------------------
# criterion 2: meta-gradient oracle

def test_criterion_2_meta_gradient_oracle():
    started = time.time()
    worst = 0.0
    from metapred.episodes import EpisodeSampler
    for encoder in ("cnn", "lstm"):
        arch = tiny_arch(encoder)
        params = init_params(arch, 7)
        sampler = EpisodeSampler(
            [toy_domain("s1", 6, 6, 1, vocab=10, n_visits=5),
             toy_domain("s2", 6, 6, 2, vocab=10, n_visits=5)],
            toy_domain("sim", 6, 6, 3, vocab=10, n_visits=5),
            n_per_domain=4, vocab_size=10, max_seq_len=5, seed=4,
            min_seq_len=3)
        episode = sampler.sample_episode()
        for steps in (1, 2):
            for weight in (0.0, 0.5):
                config = MetaConfig(inner_lr=0.05, inner_steps=steps,
                                    source_weight=weight, n_per_domain=4)
                grads, _ = meta_gradient(params, episode, arch, config)

                def composed(p):
                    adapted = inner_adapt(p, episode, arch, config.inner_lr,
                                          steps, create_graph=False)
                    return meta_objective(p, adapted, episode, arch,
                                          weight).item()

                oracle = ad.finite_difference_oracle(composed, params,
                                                     epsilon=1e-6)
                for name in params:
                    denom = max(np.abs(oracle[name]).max(), 1e-3)
                    err = np.abs(grads[name] - oracle[name]).max() / denom
                    worst = max(worst, err)

    # closed-form scalar quadratics
    grads, values = meta_gradient_on_losses(
        quad_params(2.0), [quad_loss(1.0)], quad_loss(1.0),
        inner_lr=0.1, steps=1, source_weight=0.5, order="second")
    quad_err = abs(float(grads["w"]) - 2.62)
    quad_obj_err = abs(values["combined_loss"] - 2.62)
    for steps in (1, 2):
        a, b, lr, w0, mu = 1.4, 0.9, 0.07, -1.5, 0.3
        g, _ = meta_gradient_on_losses(
            quad_params(w0), [quad_loss(a)], quad_loss(b),
            inner_lr=lr, steps=steps, source_weight=mu, order="second")
        expected = b * (1 - lr * a) ** (2 * steps) * w0 + mu * a * w0
        quad_err = max(quad_err, abs(float(g["w"]) - expected))

    elapsed = time.time() - started
    report(2, worst < 1e-3 and quad_err < 1e-10 and quad_obj_err < 1e-10
           and elapsed < 120,
           f"composed-objective FD rel err {worst:.2e} (tol 1e-3); "
           f"quadratic closed-form err {quad_err:.2e} (tol 1e-10); "
           f"{elapsed:.1f}s (< 120s)")


# --------------------------------------------------------------------------
# criterion 3: MAML equivalence at zero source weight

def test_criterion_3_maml_equivalence():
    worst = 0.0
    rng = np.random.default_rng(33)
    for _ in range(20):
        a, b = rng.uniform(0.2, 2.0, size=2)
        lr, w0 = rng.uniform(0.01, 0.3), rng.uniform(-3.0, 3.0)
        grads, _ = meta_gradient_on_losses(
            quad_params(w0), [quad_loss(a)], quad_loss(b),
            inner_lr=lr, steps=1, source_weight=0.0, order="second")
        worst = max(worst, abs(float(grads["w"]) -
                               straight_line_maml_grad(w0, a, b, lr, 1)))

    # full update sequence through Adam
    config = MetaConfig(inner_lr=0.1, meta_lr=0.001, source_weight=0.0,
                        inner_steps=1)
    mine = quad_params(2.0)
    adam = Adam.from_config(config)
    w_ref, m, v = 2.0, 0.0, 0.0
    for t in range(1, 6):
        grads, _ = meta_gradient_on_losses(
            mine, [quad_loss(1.3)], quad_loss(0.7),
            inner_lr=0.1, steps=1, source_weight=0.0, order="second")
        mine = ad.param_set_from_arrays(adam.step(mine.arrays(), grads),
                                        mine.arch_tag, dtype=np.float64)
        g = straight_line_maml_grad(w_ref, 1.3, 0.7, 0.1, 1)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        w_ref -= 0.001 * (m / (1 - 0.9 ** t)) / \
            (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
        worst = max(worst, abs(float(mine["w"].value) - w_ref))
    report(3, worst < 1e-10,
           f"zero-weight update identical to straight-line MAML: max dev "
           f"{worst:.2e} (tol 1e-10)")


# --------------------------------------------------------------------------
# criterion 4: fine-tune freeze contract

def test_criterion_4_freeze_contract():
    arch = tiny_arch("cnn", dtype="float32")
    params = init_params(arch, 5)
    target = toy_domain("tgt", 16, 16, 8, case_code=7, control_code=8)
    cfg = FineTuneConfig(resource_fraction=0.5, epochs=4, seed=1)
    tuned, _, _ = fine_tune(params, target, arch, cfg)
    frozen = default_frozen(params)
    frozen_ok = all(tuned[n].value.tobytes() == params[n].value.tobytes()
                    for n in frozen)
    head_changed = all(tuned[n].value.tobytes() != params[n].value.tobytes()
                       for n in params if n not in frozen)
    report(4, frozen_ok and head_changed,
           f"embedding/encoder bit-identical: {frozen_ok}; "
           f"MLP tensors changed: {head_changed}")


# --------------------------------------------------------------------------
# criterion 5: leakage freedom over 10,000 patients + episode sweep

def test_criterion_5_leakage_freedom():
    spec = CohortSpec(domains=tuple(DOMAINS), cases_per_domain=1000,
                      controls_per_domain=1000, vocab_groups=300,
                      mean_visits=12.0, shared_signal=0.15,
                      domain_shift=0.5, label_noise=0.05, seed=55)
    audited = leakage_audit(spec)

    datasets = generate_cohort(CohortSpec(
        domains=tuple(DOMAINS), cases_per_domain=40, controls_per_domain=40,
        vocab_groups=120, mean_visits=8.0, seed=7))
    doms = {d.name: split_train_test(d, 0.2, 3) for d in datasets}
    genuine = "alzheimers"
    sampler = EpisodeSampler(
        [doms["dementia"], doms["amnesia"], doms["parkinsons"]],
        doms["mci"], n_per_domain=8, vocab_size=121, max_seq_len=8, seed=1,
        forbidden_domains=(genuine,))
    test_ids = {p.patient_id for d in doms.values() for p in d.test_patients}
    violations = 0
    for _ in range(300):
        episode = sampler.sample_episode()
        for batch in episode.batches:
            ids = set(batch.patient_ids)
            if ids & test_ids or batch.domain == genuine or \
                    any(i.startswith(genuine) for i in ids):
                violations += 1
    report(5, audited == 10_000 and violations == 0,
           f"{audited} patients audited with zero in-window qualifying "
           f"diagnoses; {violations} episode violations in 300 episodes")


# --------------------------------------------------------------------------
# criteria 6 and 7: directional reproduction on the shift-0.5 cohort

def test_criterion_6_low_resource_effect(lowshift_runs):
    meta02 = _mean(lowshift_runs["finetune"], "meta-cnn-ft", 0.2, "auroc")
    sup02 = _mean(lowshift_runs["baselines"], "cnn", 0.2, "auroc")
    elapsed = lowshift_runs["elapsed"]
    # meta-training itself must have converged (smoothed combined loss
    # late in training below its early value)
    converged = True
    for seed in SEEDS:
        history = lowshift_runs["root"] / "out" / "history" / \
            f"meta_seed{seed}.jsonl"
        losses = [json.loads(l)["combined_loss"]
                  for l in history.read_text().splitlines()]
        smooth = np.convolve(losses, np.ones(9) / 9, mode="valid")
        converged = converged and smooth[-1] < smooth[10]
    report(6, meta02 >= sup02 + 0.05 and elapsed < 1800 and converged,
           f"meta-cnn-ft@0.2 AUROC {meta02:.4f} vs supervised cnn@0.2 "
           f"{sup02:.4f} (needs +0.05 gap); converged: {converged}; "
           f"pipeline {elapsed:.0f}s (< 1800s)")


def test_criterion_7_resource_level_sweep(lowshift_runs):
    details = []
    ok = True
    for rho in RHO_GRID:
        meta = _mean(lowshift_runs["finetune"], "meta-cnn-ft", rho, "f1")
        trans = _mean(lowshift_runs["baselines"], "translearn", rho, "f1")
        multi = _mean(lowshift_runs["baselines"], "multilearn", rho, "f1")
        ok = ok and meta >= trans - 0.02 and meta >= multi - 0.02
        details.append(f"rho={rho:g}: meta {meta:.3f} trans {trans:.3f} "
                       f"multi {multi:.3f}")
    report(7, ok, "F1 within 0.02 of TransLearn/MultiLearn at every "
           "fraction -> " + "; ".join(details))


# --------------------------------------------------------------------------
# criterion 8: source-supervision ablation on the shift-1.0 cohort

def test_criterion_8_ablation_beats_plain_maml(highshift_ablation):
    # "final" AUROC = mean over the plateau tail (last 20 iterations),
    # which the plateau requirement itself makes well-defined
    finals = {"metapred": [], "maml": []}
    plateau_ok = True
    for (variant, _seed), records in highshift_ablation.items():
        evals = [r["eval_auroc"] for r in records]
        finals[variant].append(float(np.mean(evals[-20:])))
        losses = np.array([r["combined_loss"] for r in records])
        plateau_ok = plateau_ok and \
            losses[-50:].var() < 0.10 * losses[0]
    mean_meta = float(np.mean(finals["metapred"]))
    mean_maml = float(np.mean(finals["maml"]))
    report(8, mean_meta >= mean_maml and plateau_ok,
           f"final simulated-target AUROC: source-supervised {mean_meta:.4f} "
           f"vs zero-weight ablation {mean_maml:.4f}; both plateaued: "
           f"{plateau_ok}")


# --------------------------------------------------------------------------
# criterion 9: metric oracles

def test_criterion_9_metric_oracles():
    rng = np.random.default_rng(99)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 14))
        labels = np.zeros(n, dtype=int)
        labels[: int(rng.integers(1, n))] = 1
        rng.shuffle(labels)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        scores = rng.choice([0.0, 0.2, 0.4, 0.5, 0.6, 0.8, 1.0], size=n)
        worst = max(worst, abs(auroc(scores, labels) -
                               brute_force_auroc(scores, labels)))
    f1_exact = (f1([1, 1, 1, 0], [1, 1, 0, 1]) == 2 * 2 / (2 * 2 + 1 + 1)
                and f1([1, 0], [1, 0]) == 1.0 and f1([0, 0], [1, 0]) == 0.0)
    report(9, worst == 0.0 and f1_exact,
           f"AUROC vs brute-force pairwise counting on 1000 instances: max "
           f"dev {worst}; F1 hand-formula exact: {f1_exact}")


# --------------------------------------------------------------------------
# criterion 10: byte-for-byte determinism of a manifest re-run

def test_criterion_10_manifest_rerun_determinism(lowshift_runs):
    root = lowshift_runs["root"]
    manifest = lowshift_runs["manifest"]
    results = root / "out" / "results"
    targets = ["metapred_finetune.csv", "baselines.csv"]
    before = {name: (results / name).read_bytes() for name in targets}
    assert main(["finetune", "--manifest", manifest, "--jobs", "3"]) == 0
    assert main(["train-baseline", "--manifest", manifest, "--jobs", "3"]) == 0
    after = {name: (results / name).read_bytes() for name in targets}
    identical = before == after
    report(10, identical,
           f"re-running finetune/train-baseline reproduced "
           f"{targets} byte-for-byte: {identical}")
