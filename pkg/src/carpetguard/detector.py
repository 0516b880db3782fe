"""Retrieval-augmented interface classifier with a scikit-learn estimator API."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_feature_array, check_labels
from .classifier import ClassificationResult, classify_oracle, classify_remote, oracle_score
from .embedding import EmbeddingProviderConfig, make_embedder
from .exceptions import InsufficientClassSupport, RemoteUnavailable, UnparseableReply
from .prompt import build_prompt
from .representation import RepresentationKind, render
from .retrieval import RetrievalRecord, build_indices, retrieve_context
from .telemetry import InterfaceFeatures

logger = logging.getLogger(__name__)

UNCLASSIFIED = -1


def _as_feature_rows(X):
    if len(X) and isinstance(X[0], InterfaceFeatures):
        X = [f.to_array() for f in X]
    return check_feature_array(X)


class RAGDetector(ClassifierMixin, BaseEstimator):
    """Classify interface windows from class-partitioned retrieved examples.

    ``fit`` renders each labelled window, embeds it and builds one exact
    index per class. At prediction time each window is rendered without its
    label, its ``k`` nearest benign and attack neighbours are retrieved and
    a few-shot prompt is classified either by a remote chat model
    (``classifier="remote"``) or by the distance-margin oracle.

    Parameters
    ----------
    representation : {"json", "nlr"}
    k : int, neighbours retrieved per class.
    embedding : EmbeddingProviderConfig or None
        ``None`` means the deterministic hash embedder with default settings.
    classifier : {"oracle", "remote"}
    model_config : ModelConfig or None
        Required when ``classifier="remote"``.
    max_in_flight : int
        Concurrent remote classification requests.

    ``predict`` returns ``-1`` for windows the remote model failed to
    classify; ``classify`` exposes the underlying results (``None`` there).
    """

    def __init__(self, representation="json", k=3, embedding=None, classifier="oracle",
                 model_config=None, max_in_flight=1):
        self.representation = representation
        self.k = k
        self.embedding = embedding
        self.classifier = classifier
        self.model_config = model_config
        self.max_in_flight = max_in_flight

    # -- fitting -------------------------------------------------------------

    def _validate_params(self):
        self.kind_ = RepresentationKind.parse(self.representation)
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.classifier not in ("oracle", "remote"):
            raise ValueError(f"classifier must be 'oracle' or 'remote', got {self.classifier!r}")
        if self.classifier == "remote" and self.model_config is None:
            raise ValueError("remote classifier needs a model_config")
        self.embedding_config_ = self.embedding or EmbeddingProviderConfig()
        self.embedder_ = make_embedder(self.embedding_config_)

    def fit(self, X, y, ids=None, metadata=None):
        X = _as_feature_rows(X)
        y = check_labels(y, X.shape[0])
        self._validate_params()
        ids = list(range(X.shape[0])) if ids is None else [int(i) for i in ids]
        metadata = metadata if metadata is not None else [{}] * X.shape[0]
        texts = [render(InterfaceFeatures.from_array(row), self.kind_, int(label)).text
                 for row, label in zip(X, y)]
        vectors = self.embedder_.embed_batch(texts)
        records = [RetrievalRecord(i, t, v, int(label), dict(m))
                   for i, t, v, label, m in zip(ids, texts, vectors, y, metadata)]
        self.benign_index_, self.attack_index_ = build_indices(records)
        for idx in (self.benign_index_, self.attack_index_):
            if len(idx) < self.k:
                raise InsufficientClassSupport(f"class {idx.label} has {len(idx)} records, k={self.k}")
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        return self

    @classmethod
    def from_indices(cls, benign_index, attack_index, **params) -> "RAGDetector":
        """Wrap already-built indices (e.g. loaded from disk) without refitting."""
        det = cls(**params)
        det._validate_params()
        det.benign_index_, det.attack_index_ = benign_index, attack_index
        det.classes_ = np.array([0, 1])
        det.n_features_in_ = 10
        return det

    # -- inference -----------------------------------------------------------

    def render_queries(self, X) -> list[str]:
        check_is_fitted(self, "benign_index_")
        X = _as_feature_rows(X)
        return [render(InterfaceFeatures.from_array(row), self.kind_).text for row in X]

    def retrieve(self, X) -> list:
        texts = self.render_queries(X)
        if not texts:
            return []
        vectors = self.embedder_.embed_batch(texts)
        return [retrieve_context(self.benign_index_, self.attack_index_, v, t, self.k)
                for v, t in zip(vectors, texts)]

    def prompts(self, X) -> list:
        return [build_prompt(ctx, self.kind_, self.k) for ctx in self.retrieve(X)]

    def decision_function(self, X) -> np.ndarray:
        """Oracle margin: mean benign distance minus mean attack distance."""
        return np.array([oracle_score(ctx) for ctx in self.retrieve(X)])

    def _classify_one(self, ctx) -> ClassificationResult | None:
        if self.classifier == "oracle":
            return classify_oracle(ctx)
        prompt = build_prompt(ctx, self.kind_, self.k)
        try:
            return classify_remote(prompt, self.model_config)
        except (RemoteUnavailable, UnparseableReply) as exc:
            logger.warning("window left unclassified: %s", exc)
            return None

    def classify(self, X) -> list:
        contexts = self.retrieve(X)
        if self.classifier == "remote" and self.max_in_flight > 1 and len(contexts) > 1:
            with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
                return list(pool.map(self._classify_one, contexts))
        return [self._classify_one(ctx) for ctx in contexts]

    def predict(self, X) -> np.ndarray:
        return np.array([UNCLASSIFIED if r is None else r.label for r in self.classify(X)],
                        dtype=np.int64)
