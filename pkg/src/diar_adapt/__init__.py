"""Speaker diarisation from precomputed embeddings with session-level embedding adaptation."""

from ._validation import DataError
from .aggregate import AggregationConfig, AttentionAggregator, attention_aggregate, cosine_affinity
from .cluster import (
    AHCClustering,
    SpectralClustering,
    SpectralConfig,
    ahc,
    estimate_k_silhouette,
    kmeans,
    spectral,
    spectral_from_affinity,
)
from .dim_reduce import SessionAutoEncoder, TrainConfig, reduce_session, train_session_ae
from .embeddings import SessionEmbeddings, read_embeddings, segment_embeddings, write_embeddings
from .nonspeech import ClusterAssignment, build_reliable_set, identify_nonspeech_cluster, refine
from .pipeline import PipelineConfig, run_ablation, run_diarise
from .sad_post import FrameProbs, binarize, read_sad_probs, smooth, write_sad_probs
from .scoring import DerReport, Timeline, Turn, emit_rttm, parse_rttm, score, score_many
from .synthetic import SyntheticSessionSpec, generate_synthetic_session, make_benchmark

__version__ = "0.1.0"

__all__ = [
    "AHCClustering",
    "AggregationConfig",
    "AttentionAggregator",
    "ClusterAssignment",
    "DataError",
    "DerReport",
    "FrameProbs",
    "PipelineConfig",
    "SessionAutoEncoder",
    "SessionEmbeddings",
    "SpectralClustering",
    "SpectralConfig",
    "SyntheticSessionSpec",
    "Timeline",
    "TrainConfig",
    "Turn",
    "ahc",
    "attention_aggregate",
    "binarize",
    "build_reliable_set",
    "cosine_affinity",
    "emit_rttm",
    "estimate_k_silhouette",
    "generate_synthetic_session",
    "identify_nonspeech_cluster",
    "kmeans",
    "make_benchmark",
    "parse_rttm",
    "read_embeddings",
    "read_sad_probs",
    "reduce_session",
    "refine",
    "run_ablation",
    "run_diarise",
    "score",
    "score_many",
    "segment_embeddings",
    "smooth",
    "spectral",
    "spectral_from_affinity",
    "train_session_ae",
    "write_embeddings",
    "write_sad_probs",
]
