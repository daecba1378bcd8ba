"""uniembed: specialist embedding training and universal distillation.

Train per-domain specialist embedding models on synthetic multi-domain feature
data, then unify them into a single universal embedding by distilling either
neighbor-pick distributions (SND) or batch-normalized pairwise distances (RKD)
from the frozen specialists.
"""

from .backend import backend_name
from .errors import (ConfigError, DatasetParseError, DegenerateBatchError,
                     DegenerateInputError, EmptyBatchError, InputError,
                     TrainingError, UniembedError)
from .evaluation import (EvalReport, RatioHistogram, concat_pca_embedder,
                         distance_ratio_hist, fused_recall, pca_spectrum,
                         recall_at_k, unfused_recall)
from .geometry import (NeighborDistribution, calibrated_neighbor_probs,
                       neighbor_probs, pairwise_sq_dist, pca, row_perplexity,
                       search_sigma, unit_normalize)
from .losses import LossResult, huber, rkd_distance, snd, triplet_semihard
from .model import (AdamState, EmbeddingModel, adam_step, backward, embed,
                    forward, init_adam, init_model, load_model, save_model)
from .sampling import Batch, BatchSpec, Sampler, batch_features, next_batch
from .synthdata import (DomainDataset, DomainSpec, ScenarioConfig,
                        generate, generate_coarse_fine, generate_exclusive,
                        load_dataset, save_dataset)
from .training import (CurveLog, TrainConfig, TrainResult, distill_coarse_fine,
                       distill_universal, train_fused, train_specialist)

__version__ = "0.1.0"

__all__ = [
    "AdamState", "Batch", "BatchSpec", "ConfigError", "CurveLog",
    "DatasetParseError", "DegenerateBatchError", "DegenerateInputError",
    "DomainDataset", "DomainSpec", "EmbeddingModel", "EmptyBatchError",
    "EvalReport", "InputError", "LossResult", "NeighborDistribution",
    "RatioHistogram", "Sampler", "ScenarioConfig", "TrainConfig", "TrainResult",
    "TrainingError", "UniembedError", "adam_step", "backend_name",
    "backward", "batch_features", "calibrated_neighbor_probs",
    "concat_pca_embedder", "distance_ratio_hist", "distill_coarse_fine",
    "distill_universal", "embed", "forward", "fused_recall", "generate",
    "generate_coarse_fine", "generate_exclusive", "huber", "init_adam",
    "init_model", "load_dataset", "load_model", "neighbor_probs", "next_batch",
    "pairwise_sq_dist", "pca", "pca_spectrum", "recall_at_k", "rkd_distance",
    "row_perplexity", "save_dataset", "save_model", "search_sigma", "snd",
    "train_fused", "train_specialist", "triplet_semihard", "unfused_recall",
    "unit_normalize",
]
