"""Seeded synthetic multi-domain feature datasets, plus dataset file I/O.

Two regimes mirror the experimental settings the toolkit reproduces:

* ``exclusive`` -- m mutually exclusive domains, each a set of Gaussian class
  clusters around a domain center on its own coordinate axis.
* ``coarse_fine`` -- one broad domain whose class 0 covers a small region that
  a second dataset relabels at sub-class granularity (two labelings of the
  same region, no shared sample ids).

Generation is a pure function of the config. Each (domain, class) pair gets
its own PCG64 stream spawned from the scenario seed, so adding a domain or a
class never perturbs the draws of the others.
"""

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, DatasetParseError

SPLIT_TRAIN = 0
SPLIT_EVAL = 1
SUB_NONE = 0
SUB_PROBE = 1
SUB_GALLERY = 2

_SPLIT_TOKENS = {
    "train": (SPLIT_TRAIN, SUB_NONE),
    "eval": (SPLIT_EVAL, SUB_NONE),
    "eval,probe": (SPLIT_EVAL, SUB_PROBE),
    "eval,gallery": (SPLIT_EVAL, SUB_GALLERY),
}
_SPLIT_NAMES = {v: k for k, v in _SPLIT_TOKENS.items()}


@dataclass
class DomainDataset:
    domain_id: str
    features: np.ndarray   # (n, f) float64
    class_ids: np.ndarray  # (n,) int64
    split: np.ndarray      # (n,) int8, SPLIT_*
    subsplit: np.ndarray   # (n,) int8, SUB_*

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def probe_gallery(self) -> bool:
        return bool(np.any(self.subsplit != SUB_NONE))

    def train_indices(self) -> np.ndarray:
        return np.flatnonzero(self.split == SPLIT_TRAIN)

    def eval_indices(self) -> np.ndarray:
        return np.flatnonzero(self.split == SPLIT_EVAL)

    def probe_indices(self) -> np.ndarray:
        return np.flatnonzero((self.split == SPLIT_EVAL) & (self.subsplit == SUB_PROBE))

    def gallery_indices(self) -> np.ndarray:
        return np.flatnonzero((self.split == SPLIT_EVAL) & (self.subsplit == SUB_GALLERY))

    def train_classes(self) -> np.ndarray:
        return np.unique(self.class_ids[self.split == SPLIT_TRAIN])

    def eval_classes(self) -> np.ndarray:
        return np.unique(self.class_ids[self.split == SPLIT_EVAL])

    def train_indices_by_class(self) -> dict:
        out = {}
        for i in self.train_indices():
            out.setdefault(int(self.class_ids[i]), []).append(int(i))
        return {c: np.asarray(v) for c, v in out.items()}

    def validate(self) -> None:
        train = set(self.train_classes().tolist())
        ev = set(self.eval_classes().tolist())
        if train & ev:
            raise ConfigError(
                f"domain {self.domain_id}: train/eval class sets overlap: {sorted(train & ev)}"
            )
        eval_ids = self.class_ids[self.split == SPLIT_EVAL]
        classes, counts = np.unique(eval_ids, return_counts=True)
        if np.any(counts < 2):
            bad = classes[counts < 2].tolist()
            raise ConfigError(
                f"domain {self.domain_id}: eval classes with <2 samples: {bad}"
            )

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, DomainDataset)
            and self.domain_id == other.domain_id
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.class_ids, other.class_ids)
            and np.array_equal(self.split, other.split)
            and np.array_equal(self.subsplit, other.subsplit)
        )


@dataclass
class DomainSpec:
    name: str
    classes: int
    samples_per_class: int
    cluster_std: float         # within-class noise on the signal dims
    separation: float          # offset of the domain center along its axis
    class_spread: float = 2.0  # radius of the ball class centers are drawn in
    train_classes: int = 0     # 0 means half, rounded down
    probe_gallery: bool = False
    signal_dims: int = 0       # 0 means class structure spans all dims
    noise_std: float = 0.0     # nuisance noise on the non-signal dims

    def resolved_train_classes(self) -> int:
        return self.train_classes if self.train_classes > 0 else self.classes // 2


@dataclass
class ScenarioConfig:
    regime: str                 # exclusive | coarse_fine
    feature_dim: int
    seed: int
    domains: list = field(default_factory=list)  # list[DomainSpec]

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "ScenarioConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"scenario config is not valid JSON: {exc}") from exc
        for key in ("regime", "feature_dim", "seed", "domains"):
            if key not in doc:
                raise ConfigError(f"scenario config missing field: {key}")
        domains = []
        for i, d in enumerate(doc["domains"]):
            for key in ("name", "classes", "samples_per_class", "cluster_std", "separation"):
                if key not in d:
                    raise ConfigError(f"domains[{i}] missing field: {key}")
            domains.append(DomainSpec(**d))
        cfg = ScenarioConfig(
            regime=doc["regime"], feature_dim=int(doc["feature_dim"]),
            seed=int(doc["seed"]), domains=domains,
        )
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.regime not in ("exclusive", "coarse_fine"):
            raise ConfigError(f"unknown regime: {self.regime}")
        if not self.domains:
            raise ConfigError("scenario needs at least one domain")
        if self.regime == "coarse_fine" and len(self.domains) != 2:
            raise ConfigError("coarse_fine regime needs exactly 2 domains (coarse, fine)")
        if self.regime == "exclusive" and self.feature_dim < len(self.domains):
            raise ConfigError("feature_dim must be >= number of domains")
        names = [d.name for d in self.domains]
        if len(set(names)) != len(names):
            raise ConfigError("domain names must be unique")
        for d in self.domains:
            if d.separation < 0 or d.cluster_std <= 0 or d.class_spread <= 0:
                raise ConfigError(f"domain {d.name}: scales must be positive")
            if d.samples_per_class < 2:
                raise ConfigError(f"domain {d.name}: need >= 2 samples per class")
            if d.signal_dims < 0 or d.noise_std < 0:
                raise ConfigError(f"domain {d.name}: signal_dims/noise_std must be >= 0")
            tc = d.resolved_train_classes()
            if not (0 < tc < d.classes):
                raise ConfigError(f"domain {d.name}: train/eval class split is empty")
        if self.regime == "exclusive":
            total_signal = sum(d.signal_dims for d in self.domains)
            if total_signal > self.feature_dim:
                raise ConfigError(
                    f"signal dims sum to {total_signal} > feature_dim {self.feature_dim}"
                )


def _class_rng(seed: int, domain_idx: int, class_idx: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, domain_idx, class_idx))))


def _ball_point(rng: np.random.Generator, dim: int, radius: float) -> np.ndarray:
    direction = rng.normal(size=dim)
    direction /= np.linalg.norm(direction)
    return radius * rng.uniform() ** (1.0 / dim) * direction


def _class_samples(rng: np.random.Generator, center: np.ndarray, n: int,
                   block: np.ndarray, cluster_std: float, noise_std: float) -> np.ndarray:
    """Samples around a class center: cluster noise on the signal dims,
    nuisance noise everywhere else."""
    x = np.tile(center, (n, 1))
    x[:, block] += rng.normal(0.0, cluster_std, size=(n, block.size))
    if noise_std > 0.0:
        rest = np.setdiff1d(np.arange(center.size), block)
        x[:, rest] += rng.normal(0.0, noise_std, size=(n, rest.size))
    return x


def _assemble(domain: DomainSpec, domain_idx: int, cfg: ScenarioConfig,
              class_centers: np.ndarray, class_id_base: int,
              block: np.ndarray) -> DomainDataset:
    feats, cids, split, sub = [], [], [], []
    n_train = domain.resolved_train_classes()
    for c in range(domain.classes):
        rng = _class_rng(cfg.seed, domain_idx, 1000 + c)
        feats.append(_class_samples(rng, class_centers[c], domain.samples_per_class,
                                    block, domain.cluster_std, domain.noise_std))
        cids.extend([class_id_base + c] * domain.samples_per_class)
        is_train = c < n_train
        for s in range(domain.samples_per_class):
            split.append(SPLIT_TRAIN if is_train else SPLIT_EVAL)
            if not is_train and domain.probe_gallery:
                sub.append(SUB_GALLERY if s % 2 == 0 else SUB_PROBE)
            else:
                sub.append(SUB_NONE)
    ds = DomainDataset(
        domain_id=domain.name,
        features=np.vstack(feats),
        class_ids=np.asarray(cids, dtype=np.int64),
        split=np.asarray(split, dtype=np.int8),
        subsplit=np.asarray(sub, dtype=np.int8),
    )
    ds.validate()
    return ds


def generate_exclusive(cfg: ScenarioConfig):
    """Mutually exclusive domains; returns a list of datasets.

    Each domain owns a contiguous block of signal dimensions (all dims when
    signal_dims is 0): its class centers sit in a ball inside that block,
    shifted by `separation` along the block's first axis so the domains stay
    apart, and its samples carry cluster noise in the block plus nuisance
    noise (noise_std) on every other dimension. A specialist therefore has
    something real to learn: amplify the block, suppress the rest.
    """
    cfg.validate()
    if cfg.regime != "exclusive":
        raise ConfigError(f"expected exclusive regime, got {cfg.regime}")
    datasets = []
    class_id_base = 0
    offset = 0
    for di, domain in enumerate(cfg.domains):
        if domain.signal_dims:
            block = np.arange(offset, offset + domain.signal_dims)
            offset += domain.signal_dims
        else:
            block = np.arange(cfg.feature_dim)
        center = np.zeros(cfg.feature_dim)
        center[block[0] if domain.signal_dims else di] = domain.separation
        centers = np.empty((domain.classes, cfg.feature_dim))
        for c in range(domain.classes):
            rng = _class_rng(cfg.seed, di, c)
            centers[c] = center
            centers[c][block] += _ball_point(rng, block.size, domain.class_spread)
        datasets.append(_assemble(domain, di, cfg, centers, class_id_base, block))
        class_id_base += domain.classes
    return datasets


def generate_coarse_fine(cfg: ScenarioConfig):
    """One broad domain plus a fine relabeling of its class-0 region.

    Coarse class centers sit in a ball of radius coarse.class_spread around
    the origin. The fine sub-class centers sit in a ball of radius
    fine.class_spread around the coarse class-0 center; coarse class 0 draws
    its samples from the fine sub-class mixture, so the region carries two
    labelings. A coarse specialist cannot separate the sub-classes whenever
    fine.class_spread < coarse.cluster_std.
    """
    cfg.validate()
    if cfg.regime != "coarse_fine":
        raise ConfigError(f"expected coarse_fine regime, got {cfg.regime}")
    coarse, fine = cfg.domains
    block = np.arange(cfg.feature_dim)

    coarse_centers = np.empty((coarse.classes, cfg.feature_dim))
    for c in range(coarse.classes):
        rng = _class_rng(cfg.seed, 0, c)
        coarse_centers[c] = _ball_point(rng, cfg.feature_dim, coarse.class_spread)
    region_center = coarse_centers[0]

    fine_centers = np.empty((fine.classes, cfg.feature_dim))
    for c in range(fine.classes):
        rng = _class_rng(cfg.seed, 1, c)
        fine_centers[c] = region_center + _ball_point(rng, cfg.feature_dim, fine.class_spread)

    fine_ds = _assemble(fine, 1, cfg, fine_centers, class_id_base=coarse.classes, block=block)

    # coarse class 0 samples come from the fine mixture: same region, coarse label
    feats, cids, split, sub = [], [], [], []
    n_train = coarse.resolved_train_classes()
    for c in range(coarse.classes):
        rng = _class_rng(cfg.seed, 0, 1000 + c)
        if c == 0:
            picks = rng.integers(0, fine.classes, size=coarse.samples_per_class)
            x = fine_centers[picks] + rng.normal(
                0.0, fine.cluster_std, size=(coarse.samples_per_class, cfg.feature_dim)
            )
        else:
            x = coarse_centers[c] + rng.normal(
                0.0, coarse.cluster_std, size=(coarse.samples_per_class, cfg.feature_dim)
            )
        feats.append(x)
        cids.extend([c] * coarse.samples_per_class)
        is_train = c < n_train
        split.extend([SPLIT_TRAIN if is_train else SPLIT_EVAL] * coarse.samples_per_class)
        sub.extend([SUB_NONE] * coarse.samples_per_class)
    coarse_ds = DomainDataset(
        domain_id=coarse.name,
        features=np.vstack(feats),
        class_ids=np.asarray(cids, dtype=np.int64),
        split=np.asarray(split, dtype=np.int8),
        subsplit=np.asarray(sub, dtype=np.int8),
    )
    coarse_ds.validate()
    return coarse_ds, fine_ds


def generate(cfg: ScenarioConfig):
    """Dispatch on the regime; always returns a list of datasets."""
    if cfg.regime == "exclusive":
        return generate_exclusive(cfg)
    coarse, fine = generate_coarse_fine(cfg)
    return [coarse, fine]


def save_dataset(ds: DomainDataset, path) -> None:
    """Text format: header line, then `class_id split f1 ... ff` per sample."""
    with open(path, "w", encoding="utf-8") as f:
        f.write(
            f"uniembed-dataset v1 domain={ds.domain_id} fdim={ds.feature_dim} "
            f"samples={ds.n_samples}\n"
        )
        for i in range(ds.n_samples):
            token = _SPLIT_NAMES[(int(ds.split[i]), int(ds.subsplit[i]))]
            row = " ".join(f"{x:.17g}" for x in ds.features[i])
            f.write(f"{int(ds.class_ids[i])} {token} {row}\n")


def load_dataset(path) -> DomainDataset:
    with open(path, encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines:
        raise DatasetParseError("empty file", line=1)
    head = lines[0].split()
    if len(head) < 3 or head[0] != "uniembed-dataset" or head[1] != "v1":
        raise DatasetParseError("expected header 'uniembed-dataset v1 ...'", line=1)
    fields = {}
    for tok in head[2:]:
        if "=" not in tok:
            raise DatasetParseError(f"malformed header field {tok!r}", line=1)
        k, v = tok.split("=", 1)
        fields[k] = v
    if "domain" not in fields or "fdim" not in fields:
        raise DatasetParseError("header must carry domain= and fdim=", line=1)
    try:
        fdim = int(fields["fdim"])
    except ValueError:
        raise DatasetParseError(f"fdim is not an integer: {fields['fdim']!r}", line=1)

    feats, cids, split, sub = [], [], [], []
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        cols = raw.split()
        if len(cols) != fdim + 2:
            raise DatasetParseError(
                f"expected {fdim + 2} columns, got {len(cols)}", line=lineno
            )
        try:
            cids.append(int(cols[0]))
        except ValueError:
            raise DatasetParseError(f"bad class id {cols[0]!r}", line=lineno)
        if cols[1] not in _SPLIT_TOKENS:
            raise DatasetParseError(f"unknown split tag {cols[1]!r}", line=lineno)
        sp, su = _SPLIT_TOKENS[cols[1]]
        split.append(sp)
        sub.append(su)
        try:
            feats.append([float(x) for x in cols[2:]])
        except ValueError:
            raise DatasetParseError("bad float value", line=lineno)
    if not feats:
        raise DatasetParseError("file has a header but no samples", line=2)
    return DomainDataset(
        domain_id=fields["domain"],
        features=np.asarray(feats, dtype=np.float64),
        class_ids=np.asarray(cids, dtype=np.int64),
        split=np.asarray(split, dtype=np.int8),
        subsplit=np.asarray(sub, dtype=np.int8),
    )
