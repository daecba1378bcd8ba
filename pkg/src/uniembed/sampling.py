"""Mini-batch construction policies: naive, domain-specific, balanced, upweighted.

Every batch holds c classes x k samples. Single-domain policies (ds, bal,
upweighted) first pick a domain, then c distinct train classes uniformly, then
k samples per class (with replacement only when a class is smaller than k).
The naive policy draws c (domain, class) pairs proportionally to class size,
mixing domains inside one batch.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

POLICIES = ("naive", "ds", "bal", "upweighted")


@dataclass
class BatchSpec:
    c: int
    k: int = 4
    policy: str = "ds"
    upweight_factor: float = 10.0
    upweight_domains: tuple = ()

    @property
    def batch_size(self) -> int:
        return self.c * self.k

    def validate(self) -> None:
        if self.policy not in POLICIES:
            raise ConfigError(f"unknown sampling policy {self.policy!r}")
        if self.c < 2 or self.k < 2:
            raise ConfigError(f"need c >= 2 and k >= 2, got c={self.c} k={self.k}")
        if self.policy == "upweighted" and self.upweight_factor <= 0:
            raise ConfigError("upweight factor must be positive")


@dataclass
class Batch:
    domain: str | None          # single domain id, or None for a mixed batch
    dataset_indices: np.ndarray  # (n,) index into the dataset list
    sample_indices: np.ndarray   # (n,) local index into that dataset
    labels: np.ndarray           # (n,) class labels, unique across domains

    @property
    def size(self) -> int:
        return self.labels.shape[0]


def encode_label_stride(datasets) -> int:
    """Stride making (dataset index, class id) pairs injective as ints."""
    return int(max(ds.class_ids.max() for ds in datasets)) + 1


class Sampler:
    """Owns the RNG and the per-domain class index maps for one training loop."""

    def __init__(self, datasets, spec: BatchSpec, rng: np.random.Generator):
        spec.validate()
        if not datasets:
            raise ConfigError("need at least one dataset")
        self.datasets = list(datasets)
        self.spec = spec
        self.rng = rng
        self.stride = encode_label_stride(self.datasets)

        self._by_class = []
        self._train_counts = []
        for ds in self.datasets:
            by_class = ds.train_indices_by_class()
            if spec.policy != "naive" and len(by_class) < spec.c:
                raise ConfigError(
                    f"domain {ds.domain_id} has {len(by_class)} train classes, "
                    f"need at least c={spec.c}"
                )
            self._by_class.append(by_class)
            self._train_counts.append(sum(len(v) for v in by_class.values()))
        if spec.policy == "naive":
            total = sum(len(bc) for bc in self._by_class)
            if total < spec.c:
                raise ConfigError(
                    f"only {total} train classes across all domains, need c={spec.c}"
                )
        if spec.policy == "upweighted":
            known = {ds.domain_id for ds in self.datasets}
            missing = [d for d in spec.upweight_domains if d not in known]
            if missing:
                raise ConfigError(f"upweight domains not in dataset list: {missing}")
        self.domain_probs = self._domain_probs()

        self._class_lists = [sorted(bc) for bc in self._by_class]
        self._naive_pairs = [
            (di, cls) for di, classes in enumerate(self._class_lists) for cls in classes
        ]
        w = np.asarray(
            [len(self._by_class[di][cls]) for di, cls in self._naive_pairs],
            dtype=np.float64,
        )
        self._naive_probs = w / w.sum()

    def _domain_probs(self) -> np.ndarray:
        counts = np.asarray(self._train_counts, dtype=np.float64)
        if self.spec.policy == "bal":
            counts = np.ones_like(counts)
        elif self.spec.policy == "upweighted":
            counts = counts.copy()
            for i, ds in enumerate(self.datasets):
                if ds.domain_id in self.spec.upweight_domains:
                    counts[i] *= self.spec.upweight_factor
        return counts / counts.sum()

    def _draw_class(self, di: int, cls: int) -> np.ndarray:
        pool = self._by_class[di][cls]
        k = self.spec.k
        if len(pool) >= k:
            return self.rng.choice(pool, size=k, replace=False)
        return self.rng.choice(pool, size=k, replace=True)

    def next_batch(self) -> Batch:
        spec = self.spec
        if spec.policy == "naive":
            chosen = self.rng.choice(
                len(self._naive_pairs), size=spec.c, replace=False, p=self._naive_probs
            )
            picked = [self._naive_pairs[i] for i in chosen]
            domain = None
        else:
            di = int(self.rng.choice(len(self.datasets), p=self.domain_probs))
            classes = self._class_lists[di]
            chosen = self.rng.choice(len(classes), size=spec.c, replace=False)
            picked = [(di, classes[i]) for i in chosen]
            domain = self.datasets[di].domain_id

        ds_idx, samples, labels = [], [], []
        for di, cls in picked:
            idx = self._draw_class(di, cls)
            ds_idx.extend([di] * spec.k)
            samples.extend(int(i) for i in idx)
            labels.extend([di * self.stride + cls] * spec.k)
        return Batch(
            domain=domain,
            dataset_indices=np.asarray(ds_idx, dtype=np.int64),
            sample_indices=np.asarray(samples, dtype=np.int64),
            labels=np.asarray(labels, dtype=np.int64),
        )


def next_batch(datasets, spec: BatchSpec, rng: np.random.Generator) -> Batch:
    """One-shot batch draw; training loops should hold a Sampler instead."""
    return Sampler(datasets, spec, rng).next_batch()


def batch_features(batch: Batch, datasets) -> np.ndarray:
    """Gather the feature rows a batch refers to."""
    rows = [
        datasets[di].features[si]
        for di, si in zip(batch.dataset_indices, batch.sample_indices)
    ]
    return np.vstack(rows)
