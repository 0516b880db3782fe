"""Per-interface counter differencing and window feature extraction.

A switch port exposes cumulative receive/transmit packet and byte counters.
Two polls of the same port define a monitoring window; the counter deltas
over that window become the ten interface features used everywhere else.
"""

from __future__ import annotations

from dataclasses import astuple, dataclass, fields

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_delta_array
from .exceptions import CounterError

FEATURE_NAMES = (
    "received_packets",
    "received_bytes",
    "received_pps",
    "received_Bps",
    "avg_received_size",
    "sent_packets",
    "sent_bytes",
    "sent_pps",
    "sent_Bps",
    "avg_sent_size",
)

# integral fields, rendered without a decimal point
COUNT_FEATURES = frozenset(
    {"received_packets", "received_bytes", "sent_packets", "sent_bytes"}
)

DELTA_COLUMNS = ("elapsed_s", "d_rx_packets", "d_rx_bytes", "d_tx_packets", "d_tx_bytes")


@dataclass(frozen=True)
class InterfaceCounters:
    port_id: str
    timestamp: float
    rx_packets: int
    rx_bytes: int
    tx_packets: int
    tx_bytes: int

    def __post_init__(self):
        for name in ("rx_packets", "rx_bytes", "tx_packets", "tx_bytes"):
            value = getattr(self, name)
            if value < 0 or int(value) != value:
                raise CounterError(f"{name} must be a non-negative integer, got {value!r}")


@dataclass(frozen=True)
class CounterDelta:
    port_id: str
    elapsed_s: float
    d_rx_packets: int
    d_rx_bytes: int
    d_tx_packets: int
    d_tx_bytes: int

    def __post_init__(self):
        if not self.elapsed_s > 0:
            raise CounterError(f"elapsed_s must be positive, got {self.elapsed_s!r}")
        if min(self.d_rx_packets, self.d_rx_bytes, self.d_tx_packets, self.d_tx_bytes) < 0:
            raise CounterError("counter deltas must be non-negative")


@dataclass(frozen=True)
class InterfaceFeatures:
    """The ten per-window interface features, at full float precision."""

    received_packets: float
    received_bytes: float
    received_pps: float
    received_Bps: float
    avg_received_size: float
    sent_packets: float
    sent_bytes: float
    sent_pps: float
    sent_Bps: float
    avg_sent_size: float

    def to_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_array(cls, values) -> "InterfaceFeatures":
        values = np.asarray(values, dtype=float).ravel()
        if values.shape != (len(FEATURE_NAMES),):
            raise ValueError(f"expected {len(FEATURE_NAMES)} feature values, got {values.shape}")
        return cls(*(float(v) for v in values))

    @classmethod
    def from_dict(cls, mapping) -> "InterfaceFeatures":
        return cls(*(float(mapping[name]) for name in FEATURE_NAMES))


def _counter_delta(prev: int, curr: int) -> int:
    # a decrease means the device reset its counters and restarted at zero
    return curr - prev if curr >= prev else curr


def window_delta(prev: InterfaceCounters, curr: InterfaceCounters) -> CounterDelta:
    """Difference two polls of the same port."""
    if prev.port_id != curr.port_id:
        raise CounterError(f"port mismatch: {prev.port_id!r} vs {curr.port_id!r}")
    elapsed = curr.timestamp - prev.timestamp
    if not elapsed > 0:
        raise CounterError(f"non-positive elapsed time {elapsed!r} on port {curr.port_id!r}")
    return CounterDelta(
        port_id=curr.port_id,
        elapsed_s=elapsed,
        d_rx_packets=_counter_delta(prev.rx_packets, curr.rx_packets),
        d_rx_bytes=_counter_delta(prev.rx_bytes, curr.rx_bytes),
        d_tx_packets=_counter_delta(prev.tx_packets, curr.tx_packets),
        d_tx_bytes=_counter_delta(prev.tx_bytes, curr.tx_bytes),
    )


def _side(packets, nbytes, elapsed):
    avg = nbytes / packets if packets > 0 else 0.0
    return float(packets), float(nbytes), packets / elapsed, nbytes / elapsed, float(avg)


def compute_features(delta: CounterDelta) -> InterfaceFeatures:
    """Compute volume, rate and average-size features for one window."""
    rx = _side(delta.d_rx_packets, delta.d_rx_bytes, delta.elapsed_s)
    tx = _side(delta.d_tx_packets, delta.d_tx_bytes, delta.elapsed_s)
    return InterfaceFeatures(*rx, *tx)


def features_matrix(samples) -> np.ndarray:
    """Stack an iterable of InterfaceFeatures into an (n, 10) array."""
    rows = [s.to_array() for s in samples]
    if not rows:
        return np.empty((0, len(FEATURE_NAMES)))
    return np.vstack(rows)


class CounterFeaturizer(TransformerMixin, BaseEstimator):
    """Stateless transformer from counter-delta rows to feature rows.

    Input columns are ``DELTA_COLUMNS``: elapsed seconds followed by the
    rx packet, rx byte, tx packet and tx byte deltas. Output columns follow
    ``FEATURE_NAMES``.
    """

    def fit(self, X, y=None):
        X = self._check(X)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        X = self._check(X)
        out = np.empty((X.shape[0], len(FEATURE_NAMES)))
        for i, (elapsed, rxp, rxb, txp, txb) in enumerate(X):
            delta = CounterDelta("", elapsed, rxp, rxb, txp, txb)
            out[i] = compute_features(delta).to_array()
        return out

    def get_feature_names_out(self, input_features=None):
        return np.asarray(FEATURE_NAMES, dtype=object)

    @staticmethod
    def _check(X):
        return check_delta_array(X)
