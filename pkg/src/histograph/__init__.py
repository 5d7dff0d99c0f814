"""Graph convolutional classifiers over nucleus centroid graphs, with
occlusion- and attention-based per-node importance maps."""

from .graph import (
    GraphBuildConfig,
    NucleusGraph,
    NucleusRecord,
    build_graph,
    euclidean_distance,
    graph_stats,
    neighbors_within,
    occlude,
)
from .model import (
    Checkpoint,
    EvalReport,
    Model,
    ModelSpec,
    TrainConfig,
    Variant,
    build_model,
    evaluate,
    load_checkpoint,
    model_from_checkpoint,
    save_checkpoint,
    train,
)
from .explain import ImportanceMap, Method, attention_scores, occlusion_scores

__version__ = "0.1.0"

__all__ = [
    "GraphBuildConfig",
    "NucleusGraph",
    "NucleusRecord",
    "build_graph",
    "euclidean_distance",
    "graph_stats",
    "neighbors_within",
    "occlude",
    "Checkpoint",
    "EvalReport",
    "Model",
    "ModelSpec",
    "TrainConfig",
    "Variant",
    "build_model",
    "evaluate",
    "load_checkpoint",
    "model_from_checkpoint",
    "save_checkpoint",
    "train",
    "ImportanceMap",
    "Method",
    "attention_scores",
    "occlusion_scores",
    "__version__",
]
