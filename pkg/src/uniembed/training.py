"""Training loops: specialists, fused-data baselines, and the two distillations.

All loops share one skeleton: draw a batch, compute a loss and its gradient
with respect to the student embeddings, backpropagate through the model, and
apply Adam. Snapshots of per-domain eval recall are taken every ``eval_every``
iterations; the returned model is the snapshot with the best mean Recall@1
across domains (a fixed stopping point is unfair to late-peaking domains, so
best-snapshot selection is applied uniformly to every method).
"""

import csv
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, InputError, TrainingError
from .geometry import calibrated_neighbor_probs, neighbor_probs, pairwise_sq_dist
from .losses import rkd_distance, snd, triplet_semihard
from .model import (EmbeddingModel, adam_step, backward, copy_model, embed,
                    forward, init_adam, init_model)
from .sampling import Batch, BatchSpec, Sampler, batch_features
from .evaluation import unfused_recall

LOSSES = ("triplet", "rkd", "snd")
SIGMA_MODES = ("perplexity", "fixed")


@dataclass
class TrainConfig:
    loss: str = "triplet"
    iterations: int = 2000
    eval_every: int = 100
    c: int = 8
    k: int = 4
    policy: str = "ds"
    learning_rate: float = 1e-3
    sigma_mode: str = "perplexity"
    sigma_value: float = 1.0
    perplexity_target: float = 0.0   # 0 means 3*k
    perplexity_tol: float = 1e-3
    sigma_max_iter: int = 100
    tau: float = 1.0
    margin: float = 0.2
    huber_delta: float = 1.0
    rkd_l1: bool = False
    embed_dim: int = 16
    hidden: int = 0                  # 0 means no hidden layer
    upweight_factor: float = 10.0
    upweight_domains: tuple = ()
    seed: int = 0
    eval_ks: tuple = (1, 2, 4)

    def resolved_perplexity_target(self) -> float:
        return self.perplexity_target if self.perplexity_target > 0 else 3.0 * self.k

    def batch_spec(self, policy: str | None = None) -> BatchSpec:
        return BatchSpec(
            c=self.c, k=self.k, policy=policy or self.policy,
            upweight_factor=self.upweight_factor,
            upweight_domains=tuple(self.upweight_domains),
        )

    def validate(self) -> None:
        if self.loss not in LOSSES:
            raise ConfigError(f"unknown loss {self.loss!r}")
        if self.iterations < 0 or self.eval_every <= 0:
            raise ConfigError("iterations must be >= 0 and eval_every > 0")
        if self.sigma_mode not in SIGMA_MODES:
            raise ConfigError(f"unknown sigma mode {self.sigma_mode!r}")
        if self.sigma_mode == "fixed" and self.sigma_value <= 0:
            raise ConfigError("fixed sigma must be positive")
        if self.tau <= 0 or self.learning_rate <= 0:
            raise ConfigError("tau and learning rate must be positive")
        if self.embed_dim < 2 or self.hidden < 0:
            raise ConfigError("embed_dim must be >= 2 and hidden >= 0")
        batch = self.c * self.k
        target = self.resolved_perplexity_target()
        if self.loss == "snd" and not (1.0 < target <= batch - 1):
            raise ConfigError(
                f"perplexity target {target} outside (1, batch-1={batch - 1}]"
            )

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "TrainConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"train config is not valid JSON: {exc}") from exc
        known = set(TrainConfig.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown train config fields: {sorted(unknown)}")
        doc = dict(doc)
        for key in ("upweight_domains", "eval_ks"):
            if key in doc:
                doc[key] = tuple(doc[key])
        cfg = TrainConfig(**doc)
        cfg.validate()
        return cfg


@dataclass
class Snapshot:
    iteration: int
    recalls: dict          # domain -> {k: recall}
    loss_avg: float

    def mean_r1(self) -> float:
        return float(np.mean([r[1] for r in self.recalls.values()]))


@dataclass
class CurveLog:
    snapshots: list = field(default_factory=list)

    def best_index(self) -> int:
        scores = [s.mean_r1() for s in self.snapshots]
        return int(np.argmax(scores))

    def series(self, domain: str, k: int = 1):
        its = [s.iteration for s in self.snapshots]
        vals = [s.recalls[domain][k] for s in self.snapshots]
        return np.asarray(its), np.asarray(vals)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f)
            w.writerow(["iteration", "domain", "recall_at_1", "recall_at_2",
                        "recall_at_4", "loss_avg"])
            for s in self.snapshots:
                for domain in s.recalls:
                    r = s.recalls[domain]
                    w.writerow([s.iteration, domain, repr(r[1]), repr(r[2]),
                                repr(r[4]), repr(s.loss_avg)])


@dataclass
class TrainResult:
    model: EmbeddingModel        # best snapshot by mean eval Recall@1
    final_model: EmbeddingModel
    curve: CurveLog
    best_iteration: int
    aborted_at: int | None = None


def _loop(datasets, cfg: TrainConfig, batch_loss, policy: str) -> TrainResult:
    """Shared training skeleton. batch_loss(emb, batch) -> LossResult."""
    cfg.validate()
    ks = tuple(sorted(set(cfg.eval_ks) | {1, 2, 4}))
    root = np.random.SeedSequence(cfg.seed)
    ss_model, ss_sampler, ss_probe = root.spawn(3)

    f_in = datasets[0].feature_dim
    widths = [f_in] + ([cfg.hidden] if cfg.hidden else []) + [cfg.embed_dim]
    student = init_model(widths, np.random.Generator(np.random.PCG64(ss_model)))
    opt = init_adam(student, lr=cfg.learning_rate)
    sampler = Sampler(datasets, cfg.batch_spec(policy), np.random.Generator(np.random.PCG64(ss_sampler)))

    curve = CurveLog()
    best = copy_model(student)
    best_iter = 0
    best_score = -1.0
    aborted_at = None

    def snapshot(iteration: int, loss_avg: float) -> None:
        nonlocal best, best_iter, best_score
        report = unfused_recall(student, datasets, ks)
        curve.snapshots.append(Snapshot(iteration, report.per_domain, loss_avg))
        score = curve.snapshots[-1].mean_r1()
        if score > best_score:
            best_score = score
            best = copy_model(student)
            best_iter = iteration

    probe_rng = np.random.Generator(np.random.PCG64(ss_probe))
    probe = Sampler(datasets, cfg.batch_spec(policy), probe_rng).next_batch()
    emb0, _ = forward(student, batch_features(probe, datasets))
    snapshot(0, batch_loss(emb0, probe).loss)

    window = []
    for it in range(1, cfg.iterations + 1):
        batch = sampler.next_batch()
        x = batch_features(batch, datasets)
        emb, cache = forward(student, x)
        result = batch_loss(emb, batch)
        if not np.isfinite(result.loss):
            aborted_at = it
            break
        window.append(result.loss)
        try:
            grads = backward(student, cache, result.grad)
            adam_step(student, grads, opt)
        except TrainingError:
            aborted_at = it
            break
        if it % cfg.eval_every == 0 or it == cfg.iterations:
            snapshot(it, float(np.mean(window)))
            window = []

    return TrainResult(best, student, curve, best_iter, aborted_at)


def train_specialist(dataset, cfg: TrainConfig) -> TrainResult:
    """Triplet semi-hard training on a single domain."""
    if cfg.loss != "triplet":
        raise ConfigError(f"specialists train with the triplet loss, got {cfg.loss!r}")
    if dataset.train_indices().size == 0:
        raise ConfigError(f"domain {dataset.domain_id} has no train split")

    def batch_loss(emb, batch: Batch):
        return triplet_semihard(emb, batch.labels, cfg.margin)

    return _loop([dataset], cfg, batch_loss, policy="ds")


def train_fused(datasets, cfg: TrainConfig) -> TrainResult:
    """Triplet training on the union of domains under cfg.policy sampling."""
    if cfg.loss != "triplet":
        raise ConfigError("fused baselines train with the triplet loss")

    def batch_loss(emb, batch: Batch):
        return triplet_semihard(emb, batch.labels, cfg.margin)

    return _loop(datasets, cfg, batch_loss, policy=cfg.policy)


def _teacher_distribution(t_emb, cfg: TrainConfig):
    d = pairwise_sq_dist(t_emb)
    if cfg.sigma_mode == "fixed":
        return neighbor_probs(d, np.full(d.shape[0], cfg.sigma_value))
    return calibrated_neighbor_probs(
        d, cfg.resolved_perplexity_target(), cfg.perplexity_tol, cfg.sigma_max_iter
    )


def distill_universal(specialists: dict, datasets, cfg: TrainConfig) -> TrainResult:
    """Distill one frozen specialist per domain into a fresh student.

    Every batch is single-domain; the batch's specialist embeds it, and the
    student matches either the neighbor distribution (snd) or the normalized
    distances (rkd) of that teacher.
    """
    if cfg.loss not in ("rkd", "snd"):
        raise ConfigError(f"distillation needs loss rkd or snd, got {cfg.loss!r}")
    missing = [ds.domain_id for ds in datasets if ds.domain_id not in specialists]
    if missing:
        raise ConfigError(f"missing specialists for domains: {missing}")
    by_domain = {ds.domain_id: ds for ds in datasets}

    def batch_loss(emb, batch: Batch):
        assert batch.domain is not None, "distillation batches must be single-domain"
        teacher = specialists[batch.domain]
        x = by_domain[batch.domain].features[batch.sample_indices]
        t_emb = embed(teacher, x)
        if cfg.loss == "rkd":
            return rkd_distance(t_emb, emb, cfg.huber_delta, cfg.rkd_l1)
        return snd(_teacher_distribution(t_emb, cfg), emb, cfg.tau)

    return _loop(datasets, cfg, batch_loss, policy=cfg.policy)


def distill_coarse_fine(coarse_dataset, fine_specialist, datasets,
                        cfg: TrainConfig) -> TrainResult:
    """Mixed objective: triplet on coarse-domain batches (ground-truth labels),
    distillation against the frozen fine specialist on fine-domain batches.

    The fine domain is upweighted in the sampler (default factor 10) so it is
    seen despite the coarse domain's size.
    """
    if cfg.loss not in ("rkd", "snd"):
        raise ConfigError(f"coarse+fine distillation needs rkd or snd, got {cfg.loss!r}")
    others = [ds for ds in datasets if ds.domain_id != coarse_dataset.domain_id]
    if len(datasets) != 2 or len(others) != 1:
        raise ConfigError("coarse+fine training expects exactly [coarse, fine] datasets")
    fine_dataset = others[0]
    if not cfg.upweight_domains:
        cfg = TrainConfig(**{**asdict(cfg), "upweight_domains": (fine_dataset.domain_id,)})

    def batch_loss(emb, batch: Batch):
        assert batch.domain is not None, "coarse+fine batches must be single-domain"
        if batch.domain == coarse_dataset.domain_id:
            return triplet_semihard(emb, batch.labels, cfg.margin)
        x = fine_dataset.features[batch.sample_indices]
        t_emb = embed(fine_specialist, x)
        if cfg.loss == "rkd":
            return rkd_distance(t_emb, emb, cfg.huber_delta, cfg.rkd_l1)
        return snd(_teacher_distribution(t_emb, cfg), emb, cfg.tau)

    return _loop(datasets, cfg, batch_loss, policy="upweighted")
