"""Canned experiment suites: data, training phases, evaluation, summaries.

Two suites mirror the comparative claims the toolkit reproduces at desk scale:

* ``exclusive`` -- three mutually exclusive domains of unequal size and noise.
  Specialists are trained per domain, fused-data triplet baselines (naive /
  ds / bal sampling) and a concat+PCA baseline are built, and RKD / SND
  universal models are distilled. Canonical protocol: fused-gallery recall.
* ``coarse_fine`` -- a broad domain containing a finely relabeled region.
  The universal model trains with triplet on coarse batches and distillation
  on fine batches (fine domain upweighted 10x). Canonical protocol: unfused
  recall (the label spaces overlap, so galleries cannot be pooled).

Every function here is a pure function of its seed.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .evaluation import (EvalReport, concat_pca_embedder, distance_ratio_hist,
                         fused_recall, unfused_recall)
from .synthdata import DomainSpec, ScenarioConfig, generate
from .training import (CurveLog, TrainConfig, TrainResult, distill_coarse_fine,
                       distill_universal, train_fused, train_specialist)

EXCLUSIVE_METHODS = ("specialist", "triplet_naive", "triplet_ds", "triplet_bal",
                     "concat_pca", "rkd", "snd")
COARSE_FINE_METHODS = ("coarse_specialist", "fine_specialist", "triplet_upweighted",
                       "coarse_fine_rkd", "coarse_fine_snd")
EVAL_KS = (1, 2, 4)


def default_exclusive_scenario(seed: int) -> ScenarioConfig:
    return ScenarioConfig(
        regime="exclusive",
        feature_dim=32,
        seed=seed,
        domains=[
            DomainSpec("alpha", classes=16, samples_per_class=16, cluster_std=0.20,
                       separation=14.0, class_spread=2.5, train_classes=8,
                       signal_dims=5, noise_std=0.8),
            DomainSpec("beta", classes=24, samples_per_class=16, cluster_std=0.30,
                       separation=14.0, class_spread=2.5, train_classes=12,
                       signal_dims=5, noise_std=0.8),
            DomainSpec("gamma", classes=32, samples_per_class=20, cluster_std=0.42,
                       separation=14.0, class_spread=2.5, train_classes=16,
                       signal_dims=5, noise_std=0.8),
        ],
    )


def default_coarse_fine_scenario(seed: int) -> ScenarioConfig:
    return ScenarioConfig(
        regime="coarse_fine",
        feature_dim=32,
        seed=seed,
        domains=[
            DomainSpec("coarse", classes=10, samples_per_class=60, cluster_std=1.0,
                       separation=0.0, class_spread=7.0, train_classes=5),
            DomainSpec("fine", classes=12, samples_per_class=20, cluster_std=0.05,
                       separation=0.0, class_spread=0.5, train_classes=6),
        ],
    )


def default_scenario(suite: str, seed: int) -> ScenarioConfig:
    if suite == "exclusive":
        return default_exclusive_scenario(seed)
    if suite == "coarse_fine":
        return default_coarse_fine_scenario(seed)
    raise ConfigError(f"unknown suite {suite!r}")


def _seed(base: int, phase: int) -> int:
    return base * 1009 + phase


def specialist_config(seed: int) -> TrainConfig:
    return TrainConfig(loss="triplet", iterations=2500, eval_every=100,
                       c=8, k=4, embed_dim=16, hidden=0, seed=seed)


def fused_config(policy: str, seed: int) -> TrainConfig:
    # same architecture and budget as the distilled universal models
    return TrainConfig(loss="triplet", iterations=16000, eval_every=400,
                       c=8, k=4, policy=policy, embed_dim=16, hidden=128,
                       seed=seed)


def distill_config(loss: str, seed: int) -> TrainConfig:
    return TrainConfig(loss=loss, iterations=16000, eval_every=400,
                       c=8, k=4, policy="ds", embed_dim=16, hidden=128,
                       learning_rate=2.5e-3, tau=0.25 if loss == "snd" else 1.0,
                       seed=seed)


def coarse_fine_config(loss: str, seed: int) -> TrainConfig:
    return TrainConfig(loss=loss, iterations=8000, eval_every=250,
                       c=8, k=4, embed_dim=16, hidden=128,
                       learning_rate=2.5e-3, tau=0.25 if loss == "snd" else 1.0,
                       seed=seed)


@dataclass
class MethodOutcome:
    method: str
    unfused: EvalReport
    fused: EvalReport | None = None
    curve: CurveLog | None = None
    train_result: TrainResult | None = None

    def canonical(self, protocol: str) -> EvalReport:
        return self.fused if protocol == "fused" else self.unfused


@dataclass
class SuiteRun:
    suite: str
    seed: int
    datasets: list
    outcomes: dict = field(default_factory=dict)  # method -> MethodOutcome
    specialists: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)


def run_exclusive_suite(seed: int, methods=EXCLUSIVE_METHODS) -> SuiteRun:
    datasets = generate(default_exclusive_scenario(seed))
    run = SuiteRun("exclusive", seed, datasets)

    specialists = {}
    spec_results = {}
    for i, ds in enumerate(datasets):
        res = train_specialist(ds, specialist_config(_seed(seed, i)))
        specialists[ds.domain_id] = res.model
        spec_results[ds.domain_id] = res
    run.specialists = specialists

    if "specialist" in methods:
        # diagonal view: each specialist judged on its own domain
        per_domain_fused = {}
        per_domain_unfused = {}
        curves = CurveLog()
        for ds in datasets:
            m = specialists[ds.domain_id]
            per_domain_fused[ds.domain_id] = fused_recall(m, datasets, EVAL_KS).per_domain[ds.domain_id]
            per_domain_unfused[ds.domain_id] = unfused_recall(m, [ds], EVAL_KS).per_domain[ds.domain_id]
        run.outcomes["specialist"] = MethodOutcome(
            "specialist",
            unfused=EvalReport("unfused", per_domain_unfused, model_id="specialist", seed=seed),
            fused=EvalReport("fused", per_domain_fused, model_id="specialist", seed=seed),
            curve=curves,
        )
        run.extras["specialist_results"] = spec_results

    for phase, (method, policy) in enumerate(
        (("triplet_naive", "naive"), ("triplet_ds", "ds"), ("triplet_bal", "bal")),
        start=10,
    ):
        if method not in methods:
            continue
        res = train_fused(datasets, fused_config(policy, _seed(seed, phase)))
        run.outcomes[method] = MethodOutcome(
            method,
            unfused=unfused_recall(res.model, datasets, EVAL_KS, method, seed),
            fused=fused_recall(res.model, datasets, EVAL_KS, method, seed),
            curve=res.curve,
            train_result=res,
        )

    if "concat_pca" in methods:
        fit = np.vstack([ds.features[ds.train_indices()] for ds in datasets])
        embed_fn = concat_pca_embedder([specialists[ds.domain_id] for ds in datasets],
                                       fit, out_dim=16)
        run.outcomes["concat_pca"] = MethodOutcome(
            "concat_pca",
            unfused=unfused_recall(embed_fn, datasets, EVAL_KS, "concat_pca", seed),
            fused=fused_recall(embed_fn, datasets, EVAL_KS, "concat_pca", seed),
        )

    for method, loss, phase in (("rkd", "rkd", 20), ("snd", "snd", 21)):
        if method not in methods:
            continue
        res = distill_universal(specialists, datasets, distill_config(loss, _seed(seed, phase)))
        run.outcomes[method] = MethodOutcome(
            method,
            unfused=unfused_recall(res.model, datasets, EVAL_KS, method, seed),
            fused=fused_recall(res.model, datasets, EVAL_KS, method, seed),
            curve=res.curve,
            train_result=res,
        )
    return run


def run_coarse_fine_suite(seed: int, methods=COARSE_FINE_METHODS) -> SuiteRun:
    datasets = generate(default_coarse_fine_scenario(seed))
    coarse, fine = datasets
    run = SuiteRun("coarse_fine", seed, datasets)

    coarse_res = train_specialist(coarse, specialist_config(_seed(seed, 0)))
    fine_res = train_specialist(fine, specialist_config(_seed(seed, 1)))
    run.specialists = {coarse.domain_id: coarse_res.model, fine.domain_id: fine_res.model}

    def outcome(method, model_or_fn, curve=None, res=None):
        return MethodOutcome(
            method,
            unfused=unfused_recall(model_or_fn, datasets, EVAL_KS, method, seed),
            curve=curve,
            train_result=res,
        )

    if "coarse_specialist" in methods:
        run.outcomes["coarse_specialist"] = outcome(
            "coarse_specialist", coarse_res.model, coarse_res.curve, coarse_res)
    if "fine_specialist" in methods:
        run.outcomes["fine_specialist"] = outcome(
            "fine_specialist", fine_res.model, fine_res.curve, fine_res)

    if "triplet_upweighted" in methods:
        cfg = coarse_fine_config("snd", _seed(seed, 2))
        cfg = TrainConfig(**{**cfg.__dict__, "loss": "triplet", "policy": "upweighted",
                             "upweight_domains": (fine.domain_id,)})
        res = train_fused(datasets, cfg)
        run.outcomes["triplet_upweighted"] = outcome(
            "triplet_upweighted", res.model, res.curve, res)

    for method, loss, phase in (("coarse_fine_rkd", "rkd", 3), ("coarse_fine_snd", "snd", 4)):
        if method not in methods:
            continue
        res = distill_coarse_fine(coarse, fine_res.model, datasets,
                                  coarse_fine_config(loss, _seed(seed, phase)))
        run.outcomes[method] = outcome(method, res.model, res.curve, res)

    run.extras["ratio_hist"] = distance_ratio_hist(
        coarse_res.model, fine_res.model, fine, pair_filter="inter_class",
        n_pairs=3000, rng=np.random.default_rng(seed),
    )
    return run


def run_suite(suite: str, seed: int) -> SuiteRun:
    if suite == "exclusive":
        return run_exclusive_suite(seed)
    if suite == "coarse_fine":
        return run_coarse_fine_suite(seed)
    raise ConfigError(f"unknown suite {suite!r}")


def canonical_protocol(suite: str) -> str:
    return "fused" if suite == "exclusive" else "unfused"


def summarize(runs) -> list:
    """Per-method, per-domain median recalls over seeds.

    Returns rows [method, domain, r@1, r@2, r@4] under the suite's canonical
    protocol; one row per (method, domain).
    """
    if not runs:
        return []
    suite = runs[0].suite
    protocol = canonical_protocol(suite)
    methods = EXCLUSIVE_METHODS if suite == "exclusive" else COARSE_FINE_METHODS
    domains = [ds.domain_id for ds in runs[0].datasets]
    rows = []
    for method in methods:
        for domain in domains:
            recalls = {
                k: float(np.median([
                    run.outcomes[method].canonical(protocol).recall(domain, k)
                    for run in runs
                ]))
                for k in EVAL_KS
            }
            rows.append([method, domain] + [recalls[k] for k in EVAL_KS])
    return rows
