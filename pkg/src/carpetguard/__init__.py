"""Retrieval-augmented carpet-bombing DDoS detection and mitigation for SDN interfaces."""

from .classifier import ClassificationResult, ModelConfig, classify_oracle, classify_remote, parse_label
from .detector import RAGDetector
from .embedding import EmbeddingProviderConfig, HashEmbedder, RemoteEmbedder, make_embedder
from .mitigation import Action, MitigationConfig, MitigationTable, PortMitigationState
from .prompt import Prompt, build_prompt
from .representation import RepresentationKind, format_quantity, render, render_json, render_nlr
from .retrieval import ClassIndex, RetrievalRecord, RetrievedContext, build_indices, knn, retrieve_context
from .telemetry import (
    CounterDelta,
    CounterFeaturizer,
    InterfaceCounters,
    InterfaceFeatures,
    compute_features,
    window_delta,
)

__version__ = "0.1.0"


__all__ = [
    "Action",
    "ClassIndex",
    "ClassificationResult",
    "CounterDelta",
    "CounterFeaturizer",
    "EmbeddingProviderConfig",
    "HashEmbedder",
    "InterfaceCounters",
    "InterfaceFeatures",
    "MitigationConfig",
    "MitigationTable",
    "ModelConfig",
    "PortMitigationState",
    "Prompt",
    "RAGDetector",
    "RemoteEmbedder",
    "RepresentationKind",
    "RetrievalRecord",
    "RetrievedContext",
    "build_indices",
    "build_prompt",
    "classify_oracle",
    "classify_remote",
    "compute_features",
    "format_quantity",
    "knn",
    "make_embedder",
    "parse_label",
    "render",
    "render_json",
    "render_nlr",
    "retrieve_context",
    "window_delta",
]
