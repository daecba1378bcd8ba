"""Recall@k under unfused / fused / probe-gallery protocols, plus diagnostics.

The fused protocol pools every domain's eval (or gallery) images into one
gallery and probes it one domain at a time; labels are made unique across
domains before matching so foreign classes can never count as hits.
"""

from dataclasses import dataclass, field

import numpy as np

from . import model as model_mod
from .errors import InputError
from .geometry import pca, unit_normalize


@dataclass
class EvalReport:
    protocol: str                 # unfused | fused
    per_domain: dict              # domain -> {k: recall}
    gallery: dict = field(default_factory=dict)
    model_id: str = "model"
    seed: int | None = None

    def recall(self, domain: str, k: int) -> float:
        return self.per_domain[domain][k]

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "per_domain": {
                d: {str(k): v for k, v in r.items()} for d, r in self.per_domain.items()
            },
            "gallery": self.gallery,
            "model_id": self.model_id,
            "seed": self.seed,
        }


@dataclass
class RatioHistogram:
    bin_edges: np.ndarray
    counts: np.ndarray
    median: float
    fraction_below_1: float
    pair_filter: str
    q25: float
    q75: float
    n_pairs: int
    n_dropped: int

    @property
    def iqr(self) -> float:
        return self.q75 - self.q25

    def to_dict(self) -> dict:
        return {
            "bin_edges": [float(x) for x in self.bin_edges],
            "counts": [int(x) for x in self.counts],
            "median": self.median,
            "fraction_below_1": self.fraction_below_1,
            "pair_filter": self.pair_filter,
            "q25": self.q25,
            "q75": self.q75,
            "n_pairs": self.n_pairs,
            "n_dropped": self.n_dropped,
        }


def as_embed_fn(model):
    """Accept an EmbeddingModel or any callable features -> embeddings."""
    if callable(model) and not isinstance(model, model_mod.EmbeddingModel):
        return model
    return lambda x: model_mod.embed(model, x)


def recall_at_k(query_emb, query_labels, gallery_emb, gallery_labels, ks,
                self_exclude: bool = False, self_indices=None) -> dict:
    """Fraction of queries with a same-label item among the k nearest.

    Distance ties break toward the lower gallery index. When self_exclude is
    set, self_indices gives each query's own position in the gallery (defaults
    to identity, i.e. gallery rows are the queries in order).
    """
    q = np.asarray(query_emb, dtype=np.float64)
    g = np.asarray(gallery_emb, dtype=np.float64)
    ql = np.asarray(query_labels).ravel()
    gl = np.asarray(gallery_labels).ravel()
    if q.ndim != 2 or g.ndim != 2 or q.shape[1] != g.shape[1]:
        raise InputError("query and gallery embeddings must be 2-D with equal dim")
    if ql.shape[0] != q.shape[0] or gl.shape[0] != g.shape[0]:
        raise InputError("labels must align with embedding rows")
    ks = sorted(int(k) for k in ks)
    usable = g.shape[0] - (1 if self_exclude else 0)
    if ks[0] < 1 or ks[-1] >= usable:
        raise InputError(f"k values must lie in [1, {usable - 1}], got {ks}")

    d = ((q[:, None, :] - g[None, :, :]) ** 2).sum(axis=2)
    if self_exclude:
        if self_indices is None:
            if q.shape[0] > g.shape[0]:
                raise InputError("self_exclude needs queries to be part of the gallery")
            self_indices = np.arange(q.shape[0])
        d[np.arange(q.shape[0]), np.asarray(self_indices)] = np.inf

    order = np.argsort(d, axis=1, kind="stable")
    hits = gl[order] == ql[:, None]
    out = {}
    for k in ks:
        out[k] = float(hits[:, :k].any(axis=1).mean())
    return out


def _eval_embeddings(embed_fn, datasets):
    """Per-dataset eval-split embeddings and domain-unique labels."""
    stride = int(max(ds.class_ids.max() for ds in datasets)) + 1
    out = []
    for di, ds in enumerate(datasets):
        idx = ds.eval_indices()
        if idx.size == 0:
            raise InputError(f"domain {ds.domain_id} has an empty eval split")
        emb = embed_fn(ds.features[idx])
        labels = di * stride + ds.class_ids[idx]
        out.append((ds, idx, emb, labels))
    return out


def unfused_recall(model, datasets, ks=(1, 2, 4), model_id: str = "model",
                   seed: int | None = None) -> EvalReport:
    """Each domain queried against its own eval set only."""
    embed_fn = as_embed_fn(model)
    per_domain = {}
    sizes = {}
    for ds, idx, emb, labels in _eval_embeddings(embed_fn, datasets):
        if ds.probe_gallery:
            probe_mask = np.isin(idx, ds.probe_indices())
            gal_mask = np.isin(idx, ds.gallery_indices())
            per_domain[ds.domain_id] = recall_at_k(
                emb[probe_mask], labels[probe_mask], emb[gal_mask], labels[gal_mask],
                ks, self_exclude=False,
            )
            sizes[ds.domain_id] = int(gal_mask.sum())
        else:
            per_domain[ds.domain_id] = recall_at_k(
                emb, labels, emb, labels, ks, self_exclude=True
            )
            sizes[ds.domain_id] = int(idx.size)
    gallery = {"composition": "per-domain eval split", "sizes": sizes}
    return EvalReport("unfused", per_domain, gallery, model_id, seed)


def fused_recall(model, datasets, ks=(1, 2, 4), model_id: str = "model",
                 seed: int | None = None) -> EvalReport:
    """Each domain's queries against the union of all domains' eval images.

    Probe/gallery domains keep their probes as queries and contribute only
    their gallery half to the fused pool (no self-exclusion); the others
    contribute their whole eval split and query it with self-exclusion.
    """
    embed_fn = as_embed_fn(model)
    per_dataset = _eval_embeddings(embed_fn, datasets)

    gallery_emb, gallery_labels = [], []
    offsets = {}
    pos = 0
    for ds, idx, emb, labels in per_dataset:
        if ds.probe_gallery:
            keep = np.isin(idx, ds.gallery_indices())
            gallery_emb.append(emb[keep])
            gallery_labels.append(labels[keep])
        else:
            offsets[ds.domain_id] = pos
            gallery_emb.append(emb)
            gallery_labels.append(labels)
        pos += gallery_emb[-1].shape[0]
    g = np.vstack(gallery_emb)
    gl = np.concatenate(gallery_labels)

    per_domain = {}
    for ds, idx, emb, labels in per_dataset:
        if ds.probe_gallery:
            keep = np.isin(idx, ds.probe_indices())
            per_domain[ds.domain_id] = recall_at_k(
                emb[keep], labels[keep], g, gl, ks, self_exclude=False
            )
        else:
            self_idx = offsets[ds.domain_id] + np.arange(emb.shape[0])
            per_domain[ds.domain_id] = recall_at_k(
                emb, labels, g, gl, ks, self_exclude=True, self_indices=self_idx
            )
    gallery = {
        "composition": "union of all domains' eval/gallery splits",
        "size": int(g.shape[0]),
        "domains": [ds.domain_id for ds, *_ in per_dataset],
    }
    return EvalReport("fused", per_domain, gallery, model_id, seed)


def concat_pca_embedder(specialists, fit_data, out_dim: int):
    """Concatenate all specialists' embeddings, project with PCA, re-normalize.

    The projection is applied without centering so that with one specialist
    and out_dim equal to its width the result is an exact rotation.
    """
    specialists = list(specialists)
    if not specialists:
        raise InputError("need at least one specialist")
    fns = [as_embed_fn(m) for m in specialists]

    def concat(x):
        return np.hstack([fn(x) for fn in fns])

    fit_emb = concat(np.asarray(fit_data, dtype=np.float64))
    if out_dim > fit_emb.shape[1]:
        raise InputError(
            f"out_dim {out_dim} exceeds concatenated width {fit_emb.shape[1]}"
        )
    projection, _ = pca(fit_emb, out_dim)

    def embed_fn(x):
        return unit_normalize(concat(np.asarray(x, dtype=np.float64)) @ projection)

    return embed_fn


def distance_ratio_hist(model_a, model_b, dataset, pair_filter: str = "inter_class",
                        n_pairs: int = 2000, bins: int = 100,
                        rng: np.random.Generator | None = None,
                        split: str = "eval") -> RatioHistogram:
    """Histogram of ||A(x_i)-A(x_j)|| / ||B(x_i)-B(x_j)|| over sampled pairs."""
    if pair_filter not in ("inter_class", "intra_class", "all"):
        raise InputError(f"unknown pair filter {pair_filter!r}")
    if rng is None:
        rng = np.random.default_rng(0)
    if split == "eval":
        idx = dataset.eval_indices()
    elif split == "train":
        idx = dataset.train_indices()
    else:
        idx = np.arange(dataset.n_samples)
    if idx.size < 2:
        raise InputError(f"split {split!r} of {dataset.domain_id} has <2 samples")

    x = dataset.features[idx]
    labels = dataset.class_ids[idx]
    emb_a = as_embed_fn(model_a)(x)
    emb_b = as_embed_fn(model_b)(x)

    iu = np.triu_indices(idx.size, 1)
    if pair_filter == "inter_class":
        keep = labels[iu[0]] != labels[iu[1]]
    elif pair_filter == "intra_class":
        keep = labels[iu[0]] == labels[iu[1]]
    else:
        keep = np.ones(iu[0].size, dtype=bool)
    ii, jj = iu[0][keep], iu[1][keep]
    if ii.size == 0:
        raise InputError(f"no pairs match filter {pair_filter!r}")
    if ii.size > n_pairs:
        pick = rng.choice(ii.size, size=n_pairs, replace=False)
        ii, jj = ii[pick], jj[pick]

    num = np.linalg.norm(emb_a[ii] - emb_a[jj], axis=1)
    den = np.linalg.norm(emb_b[ii] - emb_b[jj], axis=1)
    ok = den >= 1e-9
    n_dropped = int((~ok).sum())
    ratios = num[ok] / den[ok]
    if ratios.size == 0:
        raise InputError("all sampled pairs have degenerate denominators")

    hi = float(np.percentile(ratios, 99.5))
    if hi <= 0.0:
        hi = float(ratios.max()) or 1.0
    counts, edges = np.histogram(ratios, bins=bins, range=(0.0, hi))
    return RatioHistogram(
        bin_edges=edges,
        counts=counts,
        median=float(np.median(ratios)),
        fraction_below_1=float((ratios < 1.0).mean()),
        pair_filter=pair_filter,
        q25=float(np.percentile(ratios, 25)),
        q75=float(np.percentile(ratios, 75)),
        n_pairs=int(ratios.size),
        n_dropped=n_dropped,
    )


def pca_spectrum(model, dataset) -> np.ndarray:
    """Descending covariance eigenvalues of the eval-split embeddings."""
    embed_fn = as_embed_fn(model)
    idx = dataset.eval_indices()
    emb = embed_fn(dataset.features[idx]) if idx.size else np.empty((0, 1))
    d = emb.shape[1]
    if idx.size < d + 1:
        raise InputError(
            f"need at least dim+1={d + 1} eval samples, got {idx.size}"
        )
    _, vals = pca(emb, d)
    return vals
