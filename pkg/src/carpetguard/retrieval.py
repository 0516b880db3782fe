"""Stratified splitting and class-partitioned exact nearest-neighbour retrieval."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import DimensionMismatch, InsufficientClassSupport, StaleIndexError

BENIGN, ATTACK = 0, 1
DEFAULT_K = 3
METRIC = "squared_l2"


@dataclass(frozen=True)
class RetrievalRecord:
    id: int
    rendered_text: str
    vector: np.ndarray = field(repr=False, compare=False)
    label: int
    metadata: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class Neighbor:
    record: RetrievalRecord
    distance: float


@dataclass(frozen=True)
class RetrievedContext:
    benign: tuple[Neighbor, ...]
    attack: tuple[Neighbor, ...]
    query_text: str

    @property
    def benign_distances(self) -> np.ndarray:
        return np.array([n.distance for n in self.benign])

    @property
    def attack_distances(self) -> np.ndarray:
        return np.array([n.distance for n in self.attack])


def split_dataset(samples, ratio: float = 0.8, seed: int = 0, *, labels=None, k: int = DEFAULT_K):
    """Split samples per class at ``ratio``, flooring the retrieval side.

    ``labels`` defaults to each sample's ``label`` attribute. Returns
    ``(retrieval, test)`` lists; the within-class order is a seeded
    permutation and the output keeps benign before attack.
    """
    samples = list(samples)
    if not 0 < ratio < 1:
        raise ValueError(f"ratio must lie in (0, 1), got {ratio}")
    if not samples:
        raise ValueError("cannot split an empty dataset")
    if labels is None:
        labels = [s.label for s in samples]
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    retrieval, test = [], []
    for cls in (BENIGN, ATTACK):
        members = np.flatnonzero(labels == cls)
        if len(members) < k + 1:
            raise InsufficientClassSupport(
                f"class {cls} has {len(members)} samples; need at least {k + 1}"
            )
        members = members[rng.permutation(len(members))]
        cut = int(np.floor(len(members) * ratio))
        retrieval.extend(samples[i] for i in members[:cut])
        test.extend(samples[i] for i in members[cut:])
    return retrieval, test


class ClassIndex:
    """Flat, exact squared-L2 index over the records of one class."""

    def __init__(self, label: int, records):
        self.label = label
        self.records = tuple(sorted(records, key=lambda r: r.id))
        if not self.records:
            raise InsufficientClassSupport(f"no records with label {label}")
        dims = {len(r.vector) for r in self.records}
        if len(dims) != 1:
            raise DimensionMismatch(f"mixed vector dimensions in class {label}: {sorted(dims)}")
        for r in self.records:
            if r.label != label:
                raise ValueError(f"record {r.id} has label {r.label}, index is for {label}")
        self.vectors = np.vstack([np.asarray(r.vector, dtype=np.float64) for r in self.records])
        self.vectors.setflags(write=False)
        self.ids = np.array([r.id for r in self.records], dtype=np.int64)
        self._sq_norms = np.einsum("ij,ij->i", self.vectors, self.vectors)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self):
        return len(self.records)

    def distances(self, query) -> np.ndarray:
        q = np.asarray(query, dtype=np.float64)
        if q.shape != (self.dim,):
            raise DimensionMismatch(f"query has shape {q.shape}, index dimension is {self.dim}")
        diffs = self.vectors - q
        return np.einsum("ij,ij->i", diffs, diffs)


def knn(index: ClassIndex, query, k: int = DEFAULT_K) -> list[Neighbor]:
    """The ``k`` nearest records, ascending by distance then by record id."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if k > len(index):
        raise InsufficientClassSupport(f"k={k} exceeds index size {len(index)} (label {index.label})")
    d = index.distances(query)
    # records are stored ascending by id, so a stable sort breaks ties by id
    order = np.argsort(d, kind="stable")[:k]
    return [Neighbor(index.records[i], float(d[i])) for i in order]


def build_indices(records) -> tuple[ClassIndex, ClassIndex]:
    records = list(records)
    dims = {len(r.vector) for r in records}
    if len(dims) > 1:
        raise DimensionMismatch(f"records carry mixed dimensions {sorted(dims)}")
    benign = [r for r in records if r.label == BENIGN]
    attack = [r for r in records if r.label == ATTACK]
    if len(benign) + len(attack) != len(records):
        raise ValueError("every record label must be 0 or 1")
    return ClassIndex(BENIGN, benign), ClassIndex(ATTACK, attack)


def retrieve_context(benign_idx: ClassIndex, attack_idx: ClassIndex, query_vec, query_text: str,
                     k: int = DEFAULT_K) -> RetrievedContext:
    return RetrievedContext(
        benign=tuple(knn(benign_idx, query_vec, k)),
        attack=tuple(knn(attack_idx, query_vec, k)),
        query_text=query_text,
    )


# -- persistence ---------------------------------------------------------------

MANIFEST = "manifest.json"
RECORDS = "records.jsonl"


def _content_fingerprint(indices, provider_fingerprint: str, kind: str) -> str:
    h = hashlib.sha256()
    h.update(f"{provider_fingerprint}|{kind}|{METRIC}".encode())
    for idx in indices:
        h.update(idx.ids.tobytes())
        h.update(np.ascontiguousarray(idx.vectors, dtype="<f8").tobytes())
    return h.hexdigest()


def save_indices(directory, benign: ClassIndex, attack: ClassIndex, *,
                 provider_fingerprint: str, kind: str, extra: dict | None = None) -> dict:
    """Write vector arrays, record sidecar and manifest; the manifest lands last."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for idx, name in ((benign, "benign"), (attack, "attack")):
        np.save(directory / f"{name}.npy", np.ascontiguousarray(idx.vectors, dtype="<f8"))
    with open(directory / RECORDS, "w") as fh:
        for idx in (benign, attack):
            for r in idx.records:
                fh.write(json.dumps({"id": r.id, "label": r.label, "text": r.rendered_text,
                                     "metadata": r.metadata}, sort_keys=True) + "\n")
    manifest = {
        "dim": benign.dim,
        "metric": METRIC,
        "representation": kind,
        "provider_fingerprint": provider_fingerprint,
        "benign_ids": benign.ids.tolist(),
        "attack_ids": attack.ids.tolist(),
        "class_counts": {"0": len(benign), "1": len(attack)},
        "fingerprint": _content_fingerprint((benign, attack), provider_fingerprint, kind),
    }
    if extra:
        manifest.update(extra)
    tmp = directory / (MANIFEST + ".tmp")
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, directory / MANIFEST)
    return manifest


def load_indices(directory, *, provider_fingerprint: str | None = None, kind: str | None = None):
    """Load persisted indices; raise StaleIndexError on configuration drift."""
    directory = Path(directory)
    manifest = json.loads((directory / MANIFEST).read_text())
    if provider_fingerprint is not None and manifest["provider_fingerprint"] != provider_fingerprint:
        raise StaleIndexError(
            f"index built with provider {manifest['provider_fingerprint']}, "
            f"current provider is {provider_fingerprint}"
        )
    if kind is not None and manifest["representation"] != kind:
        raise StaleIndexError(f"index holds {manifest['representation']} renderings, not {kind}")
    rows = {}
    with open(directory / RECORDS) as fh:
        for line in fh:
            row = json.loads(line)
            rows[row["id"]] = row
    indices = []
    for name, label in (("benign", BENIGN), ("attack", ATTACK)):
        vectors = np.load(directory / f"{name}.npy")
        ids = manifest[f"{name}_ids"]
        if vectors.shape != (len(ids), manifest["dim"]):
            raise StaleIndexError(f"{name}.npy shape {vectors.shape} disagrees with manifest")
        records = [
            RetrievalRecord(i, rows[i]["text"], vectors[j], label, rows[i].get("metadata", {}))
            for j, i in enumerate(ids)
        ]
        indices.append(ClassIndex(label, records))
    benign, attack = indices
    if _content_fingerprint(indices, manifest["provider_fingerprint"],
                            manifest["representation"]) != manifest["fingerprint"]:
        raise StaleIndexError("index content does not match its manifest fingerprint")
    return benign, attack, manifest
