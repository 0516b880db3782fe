import hashlib
import math
import re

import numpy as np
import pytest

from carpetguard.embedding import (
    EmbeddingProviderConfig,
    HashEmbedder,
    RemoteEmbedder,
    make_embedder,
)
from carpetguard.exceptions import DimensionMismatch, EmbeddingError
from carpetguard.representation import render_json, render_nlr

from conftest import features_from_counts


def scratch_hash_embedding(text, dim, seed, num_slots=16, word_weight=4.0):
    """Independent re-derivation of the hash projection for comparison."""
    vec = [0.0] * dim
    words = dim - num_slots
    k = 0
    for tok in re.findall(r"[0-9]+(?:\.[0-9]+)?|[A-Za-z_]+", text):
        if tok[0].isdigit():
            vec[words + (k % num_slots)] += math.log(1.0 + float(tok))
            k += 1
        else:
            digest = hashlib.blake2b(f"{seed}:{tok.lower()}".encode(), digest_size=8).digest()
            h = int.from_bytes(digest, "little")
            vec[h % words] += word_weight if h >= 2**63 else -word_weight
    norm = math.sqrt(sum(v * v for v in vec))
    return [v / norm for v in vec] if norm else vec


@pytest.mark.parametrize("text", ["a", "The interface received 174 packets", '{"packets": 9.5}'])
def test_hash_embedder_matches_scratch_formula(text):
    got = HashEmbedder(dim=384, seed=7).embed(text)
    np.testing.assert_allclose(got, scratch_hash_embedding(text, 384, 7), rtol=0, atol=1e-12)


def test_embed_is_deterministic_and_dimensioned():
    e = HashEmbedder(dim=32, seed=1)
    a, b = e.embed("hello 1"), e.embed("hello 1")
    assert a.shape == (32,)
    assert a.tobytes() == b.tobytes()
    assert np.isfinite(a).all()
    assert np.linalg.norm(a) == pytest.approx(1.0)


def test_seed_changes_vectors():
    assert not np.array_equal(HashEmbedder(seed=1).embed("word"), HashEmbedder(seed=2).embed("word"))


def test_embed_batch_contract():
    e = HashEmbedder(dim=64)
    texts = ["alpha 1", "beta 2", "gamma 3"]
    batch = e.embed_batch(texts)
    np.testing.assert_array_equal(batch, np.vstack([e.embed(t) for t in texts]))
    np.testing.assert_array_equal(e.embed_batch(["alpha 1"])[0], e.embed("alpha 1"))
    assert e.embed_batch([]).shape == (0, 64)


def test_empty_text_rejected():
    with pytest.raises(EmbeddingError):
        HashEmbedder().embed("")
    with pytest.raises(EmbeddingError):
        HashEmbedder().embed_batch(["ok", ""])


@pytest.mark.parametrize("render", [render_json, render_nlr])
def test_distance_monotone_in_one_feature_gap(render):
    e = HashEmbedder(dim=384, seed=3)
    base = e.embed(render(features_from_counts((1000, 1_400_000), (10, 700))).text)
    dists = []
    for packets in (1000, 2000, 5000, 20_000, 100_000, 400_000):
        v = e.embed(render(features_from_counts((packets, 1_400_000), (10, 700))).text)
        dists.append(float(np.sum((v - base) ** 2)))
    assert dists[0] == 0
    assert all(a < b for a, b in zip(dists, dists[1:]))


def test_provider_config_validation_and_fingerprint():
    with pytest.raises(ValueError):
        EmbeddingProviderConfig(kind="remote")
    with pytest.raises(ValueError):
        EmbeddingProviderConfig(dim=0)
    a = EmbeddingProviderConfig(seed=1)
    assert a.fingerprint() == EmbeddingProviderConfig(seed=1).fingerprint()
    assert a.fingerprint() != EmbeddingProviderConfig(seed=2).fingerprint()
    assert EmbeddingProviderConfig().dim == 384
    assert isinstance(make_embedder(a), HashEmbedder)


def test_remote_embedder_wire_contract(stub_server, monkeypatch):
    monkeypatch.setenv("CARPETGUARD_EMBED_TOKEN", "secret")
    stub_server.handler = lambda body: (200, [[float(len(t)), 1.0, 0.0] for t in body["input"]], 0)
    e = RemoteEmbedder(stub_server.url + "/embed", model="m", dim=3, batch_size=2, max_in_flight=2)
    out = e.embed_batch(["a", "bb", "ccc", "dddd", "eeeee"])
    np.testing.assert_array_equal(out[:, 0], [1, 2, 3, 4, 5])
    bodies = [r["body"] for r in stub_server.requests]
    assert all(b["model"] == "m" for b in bodies)
    assert sorted(len(b["input"]) for b in bodies) == [1, 2, 2]
    assert stub_server.requests[0]["auth"] == "Bearer secret"


def test_remote_embedder_accepts_data_shape(stub_server):
    stub_server.handler = lambda body: (200, {"data": [{"index": 1, "embedding": [2.0, 2.0]},
                                                       {"index": 0, "embedding": [1.0, 1.0]}]}, 0)
    out = RemoteEmbedder(stub_server.url, dim=2).embed_batch(["x", "y"])
    np.testing.assert_array_equal(out, [[1, 1], [2, 2]])


def test_remote_embedder_dimension_mismatch(stub_server):
    stub_server.handler = lambda body: (200, [[1.0, 2.0]], 0)
    with pytest.raises(DimensionMismatch):
        RemoteEmbedder(stub_server.url, dim=384).embed("x")


def test_remote_embedder_transport_failure(stub_server):
    stub_server.handler = lambda body: (500, {"error": "boom"}, 0)
    with pytest.raises(EmbeddingError):
        RemoteEmbedder(stub_server.url, dim=2).embed("x")
    with pytest.raises(EmbeddingError):
        RemoteEmbedder("http://127.0.0.1:9/none", dim=2, timeout_s=0.5).embed("x")
