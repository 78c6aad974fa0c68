"""Multilingual and multimodal neural topic modelling on precomputed embeddings."""

from ._core import (
    AdamConfig,
    Architecture,
    Dataset,
    M3lError,
    Model,
    ModelConfig,
    PltmHyper,
    SyntheticConfig,
    TrainConfig,
    aligned_pair_jsd,
    gen_synthetic,
    jsd,
    load_dataset,
    mrr,
    npmi_coherence,
    pltm_infer,
    pltm_train,
    run_cli,
    train,
    uap,
)

__all__ = [
    "AdamConfig",
    "Architecture",
    "Dataset",
    "M3lError",
    "Model",
    "ModelConfig",
    "PltmHyper",
    "SyntheticConfig",
    "TrainConfig",
    "aligned_pair_jsd",
    "gen_synthetic",
    "jsd",
    "load_dataset",
    "mrr",
    "npmi_coherence",
    "pltm_infer",
    "pltm_train",
    "run_cli",
    "train",
    "uap",
]
