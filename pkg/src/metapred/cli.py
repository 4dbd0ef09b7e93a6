"""Experiment driver.

One JSON manifest describes an experiment (dataset, domain roles, learner
architecture, meta-training and fine-tuning settings, baselines, seeds);
subcommands run its stages and drop artifacts under the output directory:

    metapred generate      --manifest m.json      synthesize the cohort
    metapred train-meta    --manifest m.json      meta-train per seed
    metapred meta-test     --manifest m.json      episode-style adaptation
    metapred finetune      --manifest m.json      resource-fraction sweep
    metapred train-baseline --manifest m.json     supervised/transfer/multitask
    metapred compare       --manifest m.json      paired aggregate table
    metapred ablate-mu     --manifest m.json      source-term ablation curves
    metapred sweep-sources --manifest m.json      source-combination study
    metapred export-repr   --manifest m.json      penultimate-layer features

Every artifact is written atomically and contains no timestamps, so a rerun
with the same manifest and seeds reproduces each metrics file byte for byte.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from . import autodiff as ad
from .baselines import FitConfig, TransLearnConfig, train_knn, train_multilearn, \
    train_supervised, train_translearn
from .cohort import CohortSpec, generate_cohort, load_cohort, save_cohort
from .episodes import DomainDataset, split_train_test, stratified_subset
from .evaluation import FineTuneConfig, evaluate_scores, export_representations, \
    fine_tune, meta_test, predict
from .metrics import RunResult, aggregate_runs, aggregate_table
from .models import Architecture, NormState, make_norm_state
from .training import MetaConfig, MetaTrainResult, meta_train

log = logging.getLogger("metapred")


class ManifestError(ValueError):
    """Invalid manifest; message carries the offending field path."""


# --------------------------------------------------------------------------
# manifest

@dataclass(frozen=True)
class ExperimentManifest:
    dataset_path: str | None
    cohort: CohortSpec | None
    sources: tuple[str, ...]
    simulated_target: str
    target: str
    arch: Architecture
    meta: MetaConfig
    fractions: tuple[float, ...]
    finetune_lr: float
    finetune_epochs: int
    finetune_batch: int
    baseline_methods: tuple[str, ...]
    baseline_fit: FitConfig
    translearn_source: str | None
    translearn_weight: float
    knn_k: int
    seeds: tuple[int, ...]
    test_fraction: float
    out_dir: str
    meta_test_episodes: int
    k_test: int
    export_per_domain: int
    raw: dict = field(repr=False, default_factory=dict)

    def episode_domains(self) -> tuple[str, ...]:
        return (*self.sources, self.simulated_target)


def _need(mapping: Mapping, key: str, path: str):
    if key not in mapping:
        raise ManifestError(f"{path}.{key}: missing required field")
    return mapping[key]


def _build(path: str, builder: Callable, payload: Mapping):
    try:
        return builder(dict(payload))
    except TypeError as err:
        raise ManifestError(f"{path}: {err}") from None
    except ValueError as err:
        raise ManifestError(f"{path}: {err}") from None


def parse_manifest(raw: dict, base_dir: str = ".") -> ExperimentManifest:
    if not isinstance(raw, dict):
        raise ManifestError("manifest: top level must be a JSON object")

    dataset = _need(raw, "dataset", "manifest")
    dataset_path, cohort = None, None
    if "path" in dataset:
        dataset_path = os.path.join(base_dir, dataset["path"])
    if "generate" in dataset:
        cohort = _build("manifest.dataset.generate", CohortSpec.from_dict,
                        dataset["generate"])
    if dataset_path is None and cohort is None:
        raise ManifestError(
            "manifest.dataset: needs 'path' and/or a 'generate' spec")

    domains = _need(raw, "domains", "manifest")
    sources = tuple(_need(domains, "sources", "manifest.domains"))
    simulated = _need(domains, "simulated_target", "manifest.domains")
    target = _need(domains, "target", "manifest.domains")
    if simulated in sources:
        raise ManifestError(
            "manifest.domains: simulated_target must not be listed in sources")
    if target in sources or target == simulated:
        raise ManifestError(
            "manifest.domains: target must be disjoint from sources and "
            "the simulated target")
    if len(sources) < 1:
        raise ManifestError("manifest.domains.sources: needs at least one domain")

    arch = _build("manifest.arch", Architecture.from_dict,
                  _need(raw, "arch", "manifest"))
    meta = _build("manifest.meta", MetaConfig.from_dict, raw.get("meta", {}))

    ft = raw.get("finetune", {})
    fractions = tuple(float(f) for f in ft.get("fractions", (0.2, 0.4, 0.6, 0.8, 1.0)))
    if any(not 0.0 < f <= 1.0 for f in fractions):
        raise ManifestError("manifest.finetune.fractions: values must be in (0, 1]")

    bl = raw.get("baselines", {})
    methods = tuple(bl.get("methods", ()))
    known = {"lr", "knn", "mlp", "cnn", "lstm", "translearn", "multilearn"}
    for m in methods:
        if m not in known:
            raise ManifestError(f"manifest.baselines.methods: unknown method {m!r}")
    baseline_fit = _build("manifest.baselines.fit", lambda d: FitConfig(**d),
                          bl.get("fit", {}))

    seeds = tuple(int(s) for s in raw.get("seeds", (0,)))
    if not seeds:
        raise ManifestError("manifest.seeds: needs at least one seed")

    return ExperimentManifest(
        dataset_path=dataset_path,
        cohort=cohort,
        sources=sources,
        simulated_target=simulated,
        target=target,
        arch=arch,
        meta=meta,
        fractions=fractions,
        finetune_lr=float(ft.get("lr", 1e-3)),
        finetune_epochs=int(ft.get("epochs", 30)),
        finetune_batch=int(ft.get("batch_size", 32)),
        baseline_methods=methods,
        baseline_fit=baseline_fit,
        translearn_source=bl.get("translearn_source"),
        translearn_weight=float(bl.get("translearn_weight", 0.1)),
        knn_k=int(bl.get("knn_k", 5)),
        seeds=seeds,
        test_fraction=float(raw.get("test_fraction", 0.2)),
        out_dir=os.path.join(base_dir, raw.get("out_dir", "runs")),
        meta_test_episodes=int(raw.get("meta_test_episodes", 1)),
        k_test=int(raw.get("k_test", 1)),
        export_per_domain=int(raw.get("export_per_domain", 200)),
        raw=raw,
    )


def load_manifest(path: str) -> ExperimentManifest:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ManifestError(f"manifest file not found: {path}") from None
    except json.JSONDecodeError as err:
        raise ManifestError(f"manifest: not valid JSON ({err})") from None
    return parse_manifest(raw, base_dir=os.path.dirname(os.path.abspath(path)))


def manifest_hash(manifest: ExperimentManifest) -> str:
    blob = json.dumps(manifest.raw, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def file_hash(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()[:16]


# --------------------------------------------------------------------------
# artifact I/O

def _atomic_write(path: str, text: str):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_results_csv(path: str, rows: Sequence[RunResult], provenance: dict):
    ordered = sorted(rows, key=lambda r: (r.method, r.target, r.rho, r.seed))
    _atomic_write(path, "\n".join([RunResult.header()] +
                                  [r.row() for r in ordered]) + "\n")
    _atomic_write(path.replace(".csv", ".meta.json"),
                  json.dumps(provenance, indent=2, sort_keys=True) + "\n")


def read_results_csv(path: str) -> tuple[list[RunResult], dict]:
    with open(path) as fh:
        lines = fh.read().strip().splitlines()
    rows = [RunResult.parse(line) for line in lines[1:]]
    with open(path.replace(".csv", ".meta.json")) as fh:
        return rows, json.load(fh)


def save_checkpoint(path: str, result: MetaTrainResult, seed: int,
                    provenance: dict):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    payload = {f"param/{k}": v for k, v in result.params.arrays().items()}
    if result.norm_state is not None:
        payload["norm/mean"] = result.norm_state.mean
        payload["norm/var"] = result.norm_state.var
    payload["meta/arch"] = np.frombuffer(
        json.dumps(result.arch.to_dict()).encode(), dtype=np.uint8)
    payload["meta/provenance"] = np.frombuffer(
        json.dumps({**provenance, "seed": seed}, sort_keys=True).encode(),
        dtype=np.uint8)
    tmp = path + ".tmp.npz"
    np.savez(tmp, **payload)
    os.replace(tmp, path)


def load_checkpoint(path: str) -> tuple[ad.ParamSet, NormState | None,
                                        Architecture, dict]:
    with np.load(path) as data:
        arch = Architecture.from_dict(
            json.loads(bytes(data["meta/arch"]).decode()))
        provenance = json.loads(bytes(data["meta/provenance"]).decode())
        params = ad.param_set_from_arrays(
            {k[len("param/"):]: data[k] for k in data.files
             if k.startswith("param/")},
            arch_tag=arch.tag)
        state = None
        if "norm/mean" in data.files:
            state = make_norm_state(arch)
            if state is not None:
                state.mean = data["norm/mean"].copy()
                state.var = data["norm/var"].copy()
    return params, state, arch, provenance


def checkpoint_path(out_dir: str, seed: int) -> str:
    return os.path.join(out_dir, "checkpoints", f"meta_seed{seed}.npz")


# --------------------------------------------------------------------------
# experiment plumbing

@dataclass
class RunContext:
    manifest: ExperimentManifest
    datasets: dict[str, DomainDataset]
    dataset_hash: str

    def provenance(self, seed: int | None = None) -> dict:
        out = {"dataset_hash": self.dataset_hash,
               "manifest_hash": manifest_hash(self.manifest),
               "split_seeds": list(self.manifest.seeds)}
        if seed is not None:
            out["seed"] = seed
        return out


def load_context(manifest: ExperimentManifest) -> RunContext:
    if manifest.dataset_path is None or not os.path.exists(manifest.dataset_path):
        raise ManifestError(
            f"dataset file missing: {manifest.dataset_path!r} (run "
            f"`metapred generate` first)")
    datasets, _ = load_cohort(manifest.dataset_path)
    by_name = {d.name: d for d in datasets}
    for name in (*manifest.sources, manifest.simulated_target, manifest.target):
        if name not in by_name:
            raise ManifestError(f"domain {name!r} not present in the dataset")
    return RunContext(manifest, by_name, file_hash(manifest.dataset_path))


def split_for_seed(ctx: RunContext, seed: int) -> dict[str, DomainDataset]:
    return {name: split_train_test(ds, ctx.manifest.test_fraction, seed)
            for name, ds in ctx.datasets.items()}


def eval_model_on_target(model, target: DomainDataset) -> tuple[float, float]:
    scores = model.predict_scores(target.test_patients)
    labels = np.array([p.label for p in target.test_patients])
    report = evaluate_scores(scores, labels)
    return report.auroc, report.f1


def _meta_method_name(arch: Architecture, suffix: str) -> str:
    return f"meta-{arch.encoder}-{suffix}"


# --------------------------------------------------------------------------
# subcommands

def cmd_generate(manifest: ExperimentManifest, args) -> int:
    if manifest.cohort is None:
        raise ManifestError("manifest.dataset.generate: missing cohort spec")
    path = manifest.dataset_path or os.path.join(manifest.out_dir, "cohort.jsonl")
    datasets = generate_cohort(manifest.cohort)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    save_cohort(datasets, path, manifest.cohort)
    log.info("wrote %s (%d domains, %d patients)", path, len(datasets),
             sum(len(d.patients) for d in datasets))
    return 0


def _train_meta_cell(payload) -> dict:
    ctx, seed, overrides = payload
    manifest = ctx.manifest
    domains = split_for_seed(ctx, seed)
    config = replace(manifest.meta, seed=seed, **overrides)
    result = meta_train([domains[s] for s in manifest.sources],
                        domains[manifest.simulated_target],
                        manifest.arch, config,
                        forbidden_domains=(manifest.target,))
    return {"seed": seed, "result": result}


def cmd_train_meta(manifest: ExperimentManifest, args) -> int:
    ctx = load_context(manifest)
    seeds = _selected_seeds(manifest, args)
    cells = [(ctx, seed, {}) for seed in seeds]
    for out in _map_cells(_train_meta_cell, cells, args.jobs):
        seed, result = out["seed"], out["result"]
        save_checkpoint(checkpoint_path(manifest.out_dir, seed), result, seed,
                        ctx.provenance())
        history_path = os.path.join(manifest.out_dir, "history",
                                    f"meta_seed{seed}.jsonl")
        _atomic_write(history_path, "\n".join(
            json.dumps(rec, sort_keys=True) for rec in result.history.records) + "\n")
        log.info("seed %d: final combined loss %.4f eval auroc %.4f", seed,
                 result.history.records[-1]["combined_loss"],
                 result.history.records[-1]["eval_auroc"])
    _copy_manifest(manifest, ctx)
    return 0


def _meta_test_cell(payload) -> RunResult:
    ctx, seed = payload
    manifest = ctx.manifest
    domains = split_for_seed(ctx, seed)
    params, state, arch, _ = load_checkpoint(
        checkpoint_path(manifest.out_dir, seed))
    config = replace(manifest.meta, seed=seed)
    report = meta_test(params, [domains[s] for s in manifest.sources],
                       domains[manifest.target], arch, config,
                       norm_state=state, k_test=manifest.k_test,
                       n_episodes=manifest.meta_test_episodes, seed=seed)
    return RunResult(_meta_method_name(arch, "adapt"), manifest.target,
                     0.0, seed, report.auroc, report.f1)


def cmd_meta_test(manifest: ExperimentManifest, args) -> int:
    ctx = load_context(manifest)
    rows = list(_map_cells(_meta_test_cell,
                           [(ctx, s) for s in _selected_seeds(manifest, args)],
                           args.jobs))
    write_results_csv(os.path.join(manifest.out_dir, "results", "meta_test.csv"),
                      rows, ctx.provenance())
    return 0


def _finetune_cell(payload) -> list[RunResult]:
    ctx, seed = payload
    manifest = ctx.manifest
    domains = split_for_seed(ctx, seed)
    target = domains[manifest.target]
    params, state, arch, _ = load_checkpoint(
        checkpoint_path(manifest.out_dir, seed))
    rows = []
    for rho in manifest.fractions:
        cfg = FineTuneConfig(resource_fraction=rho, lr=manifest.finetune_lr,
                             epochs=manifest.finetune_epochs,
                             batch_size=manifest.finetune_batch, seed=seed)
        tuned, tuned_state, _ = fine_tune(params, target, arch, cfg,
                                          norm_state=state)
        scores = predict(tuned, target.test_patients, arch, tuned_state)
        labels = np.array([p.label for p in target.test_patients])
        report = evaluate_scores(scores, labels)
        rows.append(RunResult(_meta_method_name(arch, "ft"), manifest.target,
                              rho, seed, report.auroc, report.f1))
    return rows


def cmd_finetune(manifest: ExperimentManifest, args) -> int:
    ctx = load_context(manifest)
    nested = _map_cells(_finetune_cell,
                        [(ctx, s) for s in _selected_seeds(manifest, args)],
                        args.jobs)
    rows = [r for cell in nested for r in cell]
    write_results_csv(
        os.path.join(manifest.out_dir, "results", "metapred_finetune.csv"),
        rows, ctx.provenance())
    return 0


def _baseline_cell(payload) -> list[RunResult]:
    ctx, seed = payload
    manifest = ctx.manifest
    domains = split_for_seed(ctx, seed)
    target = domains[manifest.target]
    fit = replace(manifest.baseline_fit, seed=seed)
    labels = np.array([p.label for p in target.test_patients])
    rows: list[RunResult] = []

    def add(method, rho, model):
        scores = model.predict_scores(target.test_patients)
        report = evaluate_scores(scores, labels)
        rows.append(RunResult(method, manifest.target, rho, seed,
                              report.auroc, report.f1))

    nn_arch = {"mlp": replace(manifest.arch, encoder="mlp"),
               "cnn": replace(manifest.arch, encoder="cnn"),
               "lstm": replace(manifest.arch, encoder="lstm"),
               "lr": replace(manifest.arch, encoder="logistic",
                             normalization="none")}

    anchor = None
    if "translearn" in manifest.baseline_methods:
        source_name = manifest.translearn_source or manifest.simulated_target
        pre = train_supervised(manifest.arch,
                               domains[source_name].train_patients, seed, fit)
        anchor = pre.params

    for rho in manifest.fractions:
        subset = stratified_subset(target.train_patients, rho, seed)
        for method in manifest.baseline_methods:
            if method in nn_arch:
                model = train_supervised(nn_arch[method], subset, seed, fit)
            elif method == "knn":
                model = train_knn(manifest.arch.vocab_size, subset,
                                  k=manifest.knn_k)
            elif method == "translearn":
                cfg = TransLearnConfig(anchor=anchor,
                                       anchor_weight=manifest.translearn_weight,
                                       fit=fit)
                model = train_translearn(cfg, manifest.arch, subset)
            elif method == "multilearn":
                pool = {name: domains[name].train_patients
                        for name in manifest.episode_domains()}
                pool[manifest.target] = subset
                model = train_multilearn(pool, manifest.arch, seed, fit)[
                    manifest.target]
            else:  # pragma: no cover
                raise ManifestError(f"unknown baseline {method!r}")
            add(method, rho, model)
    return rows


def cmd_train_baseline(manifest: ExperimentManifest, args) -> int:
    if not manifest.baseline_methods:
        raise ManifestError("manifest.baselines.methods: none configured")
    ctx = load_context(manifest)
    nested = _map_cells(_baseline_cell,
                        [(ctx, s) for s in _selected_seeds(manifest, args)],
                        args.jobs)
    rows = [r for cell in nested for r in cell]
    write_results_csv(os.path.join(manifest.out_dir, "results", "baselines.csv"),
                      rows, ctx.provenance())
    return 0


def cmd_compare(manifest: ExperimentManifest, args) -> int:
    results_dir = os.path.join(manifest.out_dir, "results")
    if not os.path.isdir(results_dir):
        raise ManifestError(f"no results directory under {manifest.out_dir}")
    all_rows: list[RunResult] = []
    reference: dict | None = None
    for name in sorted(os.listdir(results_dir)):
        if not name.endswith(".csv"):
            continue
        rows, meta = read_results_csv(os.path.join(results_dir, name))
        key = {"dataset_hash": meta.get("dataset_hash"),
               "manifest_hash": meta.get("manifest_hash"),
               "split_seeds": meta.get("split_seeds")}
        if reference is None:
            reference = key
        elif key != reference:
            raise ManifestError(
                f"results/{name}: provenance mismatch ({key} != {reference}); "
                f"comparisons must share a dataset hash and split seeds")
        all_rows.extend(rows)
    if not all_rows:
        raise ManifestError("no result rows to compare")
    aggregates = aggregate_runs(all_rows)
    table_txt = aggregate_table(aggregates)
    lines = ["method,target,rho,n_runs,auroc_mean,auroc_std,f1_mean,f1_std"]
    for a in aggregates:
        lines.append(f"{a.method},{a.target},{a.rho:g},{a.n_runs},"
                     f"{a.auroc_mean:.6f},{a.auroc_std:.6f},"
                     f"{a.f1_mean:.6f},{a.f1_std:.6f}")
    _atomic_write(os.path.join(manifest.out_dir, "compare", "table.csv"),
                  "\n".join(lines) + "\n")
    _atomic_write(os.path.join(manifest.out_dir, "compare", "table.txt"),
                  table_txt)
    sys.stdout.write(table_txt)
    return 0


def _ablate_cell(payload) -> tuple[int, str, list[dict]]:
    ctx, seed, variant, overrides = payload
    out = _train_meta_cell((ctx, seed, overrides))
    return seed, variant, out["result"].history.records


def cmd_ablate_mu(manifest: ExperimentManifest, args) -> int:
    ctx = load_context(manifest)
    cells = []
    for seed in _selected_seeds(manifest, args):
        cells.append((ctx, seed, "metapred", {}))
        cells.append((ctx, seed, "maml", {"source_weight": 0.0}))
    lines = ["variant,seed,iteration,source_loss,target_loss,combined_loss,"
             "eval_auroc,eval_f1"]
    finals: dict[str, list[float]] = {"metapred": [], "maml": []}
    for seed, variant, records in _map_cells(_ablate_cell, cells, args.jobs):
        for rec in records:
            lines.append(
                f"{variant},{seed},{rec['iteration']},{rec['source_loss']:.6f},"
                f"{rec['target_loss']:.6f},{rec['combined_loss']:.6f},"
                f"{rec['eval_auroc']:.6f},{rec['eval_f1']:.6f}")
        finals[variant].append(records[-1]["eval_auroc"])
    _atomic_write(os.path.join(manifest.out_dir, "ablate", "curves.csv"),
                  "\n".join(lines) + "\n")
    summary = {v: {"final_eval_auroc_mean": float(np.mean(a)),
                   "per_seed": [round(x, 6) for x in a]}
               for v, a in finals.items() if a}
    _atomic_write(os.path.join(manifest.out_dir, "ablate", "summary.json"),
                  json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return 0


def _sweep_cell(payload) -> list[RunResult]:
    ctx, seed, combo = payload
    manifest = ctx.manifest
    domains = split_for_seed(ctx, seed)
    config = replace(manifest.meta, seed=seed)
    result = meta_train([domains[s] for s in combo],
                        domains[manifest.simulated_target],
                        manifest.arch, config,
                        forbidden_domains=(manifest.target,))
    target = domains[manifest.target]
    rho = min(manifest.fractions)
    cfg = FineTuneConfig(resource_fraction=rho, lr=manifest.finetune_lr,
                         epochs=manifest.finetune_epochs,
                         batch_size=manifest.finetune_batch, seed=seed)
    tuned, tuned_state, _ = fine_tune(result.params, target, manifest.arch,
                                      cfg, norm_state=result.norm_state)
    scores = predict(tuned, target.test_patients, manifest.arch, tuned_state)
    labels = np.array([p.label for p in target.test_patients])
    report = evaluate_scores(scores, labels)
    name = f"{_meta_method_name(manifest.arch, 'ft')}[{'+'.join(combo)}]"
    return [RunResult(name, manifest.target, rho, seed, report.auroc, report.f1)]


def cmd_sweep_sources(manifest: ExperimentManifest, args) -> int:
    ctx = load_context(manifest)
    combos = [(s,) for s in manifest.sources]
    if len(manifest.sources) > 1:
        combos.append(tuple(manifest.sources))
    cells = [(ctx, seed, combo)
             for combo in combos for seed in _selected_seeds(manifest, args)]
    nested = _map_cells(_sweep_cell, cells, args.jobs)
    rows = [r for cell in nested for r in cell]
    write_results_csv(
        os.path.join(manifest.out_dir, "sweep_sources", "results.csv"),
        rows, ctx.provenance())
    return 0


def cmd_export_repr(manifest: ExperimentManifest, args) -> int:
    ctx = load_context(manifest)
    seed = args.seed if args.seed is not None else manifest.seeds[0]
    params, state, arch, _ = load_checkpoint(
        checkpoint_path(manifest.out_dir, seed))
    domains = split_for_seed(ctx, seed)
    patients = []
    for name in sorted(domains):
        patients.extend(domains[name].test_patients[:manifest.export_per_domain])
    path = os.path.join(manifest.out_dir, "repr", f"representations_seed{seed}.csv")
    os.makedirs(os.path.dirname(path), exist_ok=True)
    export_representations(params, patients, arch, norm_state=state, path=path)
    log.info("wrote %s (%d patients)", path, len(patients))
    return 0


# --------------------------------------------------------------------------
# driver

def _selected_seeds(manifest: ExperimentManifest, args) -> tuple[int, ...]:
    if args.seed is not None:
        return (args.seed,)
    return manifest.seeds


def _map_cells(fn, cells, jobs: int):
    if jobs <= 1 or len(cells) <= 1:
        return [fn(c) for c in cells]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, cells))


def _copy_manifest(manifest: ExperimentManifest, ctx: RunContext):
    blob = {"manifest": manifest.raw, **ctx.provenance()}
    _atomic_write(os.path.join(manifest.out_dir, "manifest.copy.json"),
                  json.dumps(blob, indent=2, sort_keys=True) + "\n")


COMMANDS = {
    "generate": cmd_generate,
    "train-meta": cmd_train_meta,
    "meta-test": cmd_meta_test,
    "finetune": cmd_finetune,
    "train-baseline": cmd_train_baseline,
    "compare": cmd_compare,
    "ablate-mu": cmd_ablate_mu,
    "sweep-sources": cmd_sweep_sources,
    "export-repr": cmd_export_repr,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="metapred",
        description="meta-learning experiments over longitudinal cohorts")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--manifest", required=True, help="experiment manifest (JSON)")
        p.add_argument("--out", default=None, help="override the output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="run a single seed instead of the manifest list")
        p.add_argument("--jobs", type=int, default=1,
                       help="parallel worker processes for independent cells")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(
        level=os.environ.get("METAPRED_LOG", "INFO").upper(),
        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        manifest = load_manifest(args.manifest)
        if args.out is not None:
            manifest = replace(manifest, out_dir=args.out)
        return COMMANDS[args.command](manifest, args)
    except ManifestError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # noqa: BLE001
        log.error("%s", err)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
