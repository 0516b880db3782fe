"""Embedding providers: a remote embedding service and a deterministic hash embedder.

Both satisfy the same contract: ``embed(text)`` returns a length-``dim``
float64 vector, identical for identical text under a fixed configuration.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
import requests

from .exceptions import DimensionMismatch, EmbeddingError

logger = logging.getLogger(__name__)

DEFAULT_EMBED_MODEL = "paraphrase-MiniLM-L6-v2"
DEFAULT_EMBED_DIM = 384

_TOKEN_RE = re.compile(r"\d+(?:\.\d+)?|[A-Za-z_]+")
_NUMBER_RE = re.compile(r"\d+(?:\.\d+)?")


@dataclass(frozen=True)
class EmbeddingProviderConfig:
    """Provider selection and parameters.

    ``kind`` is ``"hash"`` for the deterministic test embedder or
    ``"remote"`` for an embedding service reached over HTTP.
    """

    kind: str = "hash"
    dim: int = DEFAULT_EMBED_DIM
    seed: int = 0
    endpoint: str = ""
    model: str = DEFAULT_EMBED_MODEL
    token_env: str = "CARPETGUARD_EMBED_TOKEN"
    timeout_s: float = 30.0
    batch_size: int = 64
    max_in_flight: int = 4
    normalize: bool = False

    def __post_init__(self):
        if self.kind not in ("hash", "remote"):
            raise ValueError(f"unknown embedding provider kind {self.kind!r}")
        if self.dim <= 0:
            raise ValueError("embedding dimension must be positive")
        if self.kind == "remote" and (not self.endpoint or not self.model):
            raise ValueError("remote embedding provider needs an endpoint and a model name")

    def fingerprint(self) -> str:
        """Digest of every field that changes the produced vectors."""
        relevant = {"kind": self.kind, "dim": self.dim, "normalize": self.normalize}
        if self.kind == "hash":
            relevant.update(seed=self.seed, scheme=HASH_SCHEME)
        else:
            relevant.update(endpoint=self.endpoint, model=self.model)
        payload = json.dumps(relevant, sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:16]


def _l2_normalize(v: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(v)
    return v / norm if norm > 0 else v


class _Provider:
    dim: int

    def __init__(self, normalize: bool = False):
        self.normalize = normalize

    def embed(self, text: str) -> np.ndarray:
        return self.embed_batch([text])[0]

    def embed_batch(self, texts) -> np.ndarray:
        texts = list(texts)
        for t in texts:
            if not isinstance(t, str) or not t:
                raise EmbeddingError("cannot embed empty text")
        if not texts:
            return np.empty((0, self.dim))
        out = self._embed_many(texts)
        if self.normalize:
            out = np.vstack([_l2_normalize(v) for v in out])
        return out

    def _embed_many(self, texts: list[str]) -> np.ndarray:
        raise NotImplementedError


def _hash64(key: str) -> int:
    return int.from_bytes(hashlib.blake2b(key.encode(), digest_size=8).digest(), "little")


# bumped whenever the hash projection changes, so old indices read as stale
HASH_SCHEME = "blake2b-signed-w4-log1p-slots"


class HashEmbedder(_Provider):
    """Seeded token-hash projection, magnitude-sensitive in numeric literals.

    Word tokens are hashed with the seed into the first ``dim - num_slots``
    buckets with a hash-derived sign and weight ``word_weight``. The i-th numeric
    literal in the text adds ``numeric_scale * log1p(value)`` to bucket
    ``dim - num_slots + (i % num_slots)``, so the same field lands in the
    same dedicated bucket across texts rendered from one template. The sum
    is L2-normalised.

    The template words are shared by every rendering, so a heavy word weight
    keeps the norm nearly constant and distances then follow log-magnitude
    gaps instead of only the direction of the numeric block.
    """

    def __init__(self, dim: int = DEFAULT_EMBED_DIM, seed: int = 0, *,
                 num_slots: int | None = None, numeric_scale: float = 1.0,
                 word_weight: float = 4.0, normalize: bool = False):
        super().__init__(normalize)
        if dim < 2:
            raise ValueError("hash embedder needs dim >= 2")
        self.dim = dim
        self.seed = seed
        self.num_slots = num_slots if num_slots is not None else min(16, dim // 2)
        if not 0 < self.num_slots < dim:
            raise ValueError("num_slots must lie in (0, dim)")
        self.numeric_scale = numeric_scale
        self.word_weight = word_weight

    def _vector(self, text: str) -> np.ndarray:
        v = np.zeros(self.dim)
        word_buckets = self.dim - self.num_slots
        ordinal = 0
        for token in _TOKEN_RE.findall(text):
            if _NUMBER_RE.fullmatch(token):
                slot = word_buckets + ordinal % self.num_slots
                v[slot] += self.numeric_scale * math.log1p(float(token))
                ordinal += 1
            else:
                h = _hash64(f"{self.seed}:{token.lower()}")
                sign = 1.0 if (h >> 63) & 1 else -1.0
                v[h % word_buckets] += sign * self.word_weight
        return _l2_normalize(v)

    def _embed_many(self, texts):
        return np.vstack([self._vector(t) for t in texts])


class RemoteEmbedder(_Provider):
    """Client for an HTTP embedding service.

    Request body is ``{"model": ..., "input": [texts]}``. The response may be
    a bare list of float arrays, ``{"embeddings": [...]}``, or the common
    ``{"data": [{"embedding": [...]}, ...]}`` shape.
    """

    def __init__(self, endpoint: str, model: str = DEFAULT_EMBED_MODEL, dim: int = DEFAULT_EMBED_DIM, *,
                 token_env: str = "CARPETGUARD_EMBED_TOKEN", timeout_s: float = 30.0,
                 batch_size: int = 64, max_in_flight: int = 4, normalize: bool = False,
                 session: requests.Session | None = None):
        super().__init__(normalize)
        self.endpoint = endpoint
        self.model = model
        self.dim = dim
        self.token_env = token_env
        self.timeout_s = timeout_s
        self.batch_size = max(1, batch_size)
        self.max_in_flight = max(1, max_in_flight)
        self.session = session or requests.Session()

    def _headers(self):
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def _request(self, chunk: list[str]) -> np.ndarray:
        try:
            resp = self.session.post(
                self.endpoint,
                json={"model": self.model, "input": chunk},
                headers=self._headers(),
                timeout=self.timeout_s,
            )
            resp.raise_for_status()
            payload = resp.json()
        except (requests.RequestException, ValueError) as exc:
            raise EmbeddingError(f"embedding request to {self.endpoint} failed: {exc}") from exc
        vectors = _extract_vectors(payload)
        if len(vectors) != len(chunk):
            raise EmbeddingError(f"asked for {len(chunk)} embeddings, got {len(vectors)}")
        arr = np.asarray(vectors, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != self.dim:
            raise DimensionMismatch(f"expected dimension {self.dim}, service returned {arr.shape}")
        if not np.isfinite(arr).all():
            raise EmbeddingError("service returned non-finite embedding values")
        return arr

    def _embed_many(self, texts):
        chunks = [texts[i:i + self.batch_size] for i in range(0, len(texts), self.batch_size)]
        if len(chunks) == 1 or self.max_in_flight == 1:
            return np.vstack([self._request(c) for c in chunks])
        with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
            # map preserves chunk order; first failure propagates and aborts the batch
            return np.vstack(list(pool.map(self._request, chunks)))


def _extract_vectors(payload):
    if isinstance(payload, dict):
        if "embeddings" in payload:
            return payload["embeddings"]
        if "data" in payload:
            items = sorted(payload["data"], key=lambda d: d.get("index", 0))
            return [d["embedding"] for d in items]
        raise EmbeddingError(f"unrecognised embedding response keys: {sorted(payload)}")
    return payload


def make_embedder(config: EmbeddingProviderConfig) -> _Provider:
    if config.kind == "hash":
        return HashEmbedder(config.dim, config.seed, normalize=config.normalize)
    return RemoteEmbedder(
        config.endpoint, config.model, config.dim,
        token_env=config.token_env, timeout_s=config.timeout_s,
        batch_size=config.batch_size, max_in_flight=config.max_in_flight,
        normalize=config.normalize,
    )


def config_dict(config: EmbeddingProviderConfig) -> dict:
    return asdict(config)
