"""Text renderings of interface features: structured JSON and natural language.

Both renderings are byte-stable: identical features always produce identical
text, which the embedding cache, index fingerprints and golden tests rely on.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

from .telemetry import InterfaceFeatures

_FOUR_PLACES = Decimal("0.0001")


class RepresentationKind(str, enum.Enum):
    STRUCTURED_JSON = "json"
    NATURAL_LANGUAGE = "nlr"

    @classmethod
    def parse(cls, value) -> "RepresentationKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown representation kind {value!r}; use 'json' or 'nlr'") from None


@dataclass(frozen=True)
class RenderedSample:
    text: str
    kind: RepresentationKind
    label: int | None = None


def format_quantity(x: float) -> str:
    """Render a derived quantity: half-up at 4 decimals, trailing zeros stripped.

    At least one fractional digit survives, so 98 renders as ``98.0``.
    """
    if not math.isfinite(x):
        raise ValueError(f"cannot render non-finite value {x!r}")
    if x < 0:
        raise ValueError(f"cannot render negative value {x!r}")
    # repr gives the shortest round-tripping decimal, so 0.0909090... is not
    # perturbed by binary-expansion noise before rounding
    text = format(Decimal(repr(float(x))).quantize(_FOUR_PLACES, rounding=ROUND_HALF_UP), "f")
    whole, frac = text.split(".")
    frac = frac.rstrip("0") or "0"
    return f"{whole}.{frac}"


def format_count(x: float) -> str:
    if not math.isfinite(x) or x < 0:
        raise ValueError(f"counts must be finite and non-negative, got {x!r}")
    return str(int(round(x)))


def _check_label(label):
    if label is not None and label not in (0, 1):
        raise ValueError(f"label must be 0, 1 or None, got {label!r}")


def _side_json(packets, nbytes, pps, bps, avg):
    return (
        f'{{"packets": {format_count(packets)}, "bytes": {format_count(nbytes)}, '
        f'"packets_per_second": {format_quantity(pps)}, '
        f'"bytes_per_second": {format_quantity(bps)}, '
        f'"avg_packet_size": {format_quantity(avg)}}}'
    )


def render_json(f: InterfaceFeatures, label: int | None = None) -> RenderedSample:
    _check_label(label)
    received = _side_json(
        f.received_packets, f.received_bytes, f.received_pps, f.received_Bps, f.avg_received_size
    )
    sent = _side_json(f.sent_packets, f.sent_bytes, f.sent_pps, f.sent_Bps, f.avg_sent_size)
    body = f'"input_features": {{"received": {received}, "sent": {sent}}}'
    if label is not None:
        body += f', "output_label": {label}'
    text = f'{{"interface_status": {{{body}}}}}'
    return RenderedSample(text, RepresentationKind.STRUCTURED_JSON, label)


def render_nlr(f: InterfaceFeatures, label: int | None = None) -> RenderedSample:
    _check_label(label)
    text = (
        f"The interface received {format_count(f.received_packets)} packets totaling "
        f"{format_count(f.received_bytes)} bytes with a rate of {format_quantity(f.received_pps)} "
        f"packets per second and {format_quantity(f.received_Bps)} bytes per second. "
        f"The average received packet size was {format_quantity(f.avg_received_size)} bytes. "
        f"It transmitted {format_count(f.sent_packets)} packets totaling "
        f"{format_count(f.sent_bytes)} bytes at a rate of {format_quantity(f.sent_pps)} "
        f"packets per second and {format_quantity(f.sent_Bps)} bytes per second with an "
        f"average transmitted packet size of {format_quantity(f.avg_sent_size)} bytes."
    )
    if label is not None:
        text += f" The interface label is {label}."
    return RenderedSample(text, RepresentationKind.NATURAL_LANGUAGE, label)


def render(f: InterfaceFeatures, kind, label: int | None = None) -> RenderedSample:
    kind = RepresentationKind.parse(kind)
    if kind is RepresentationKind.STRUCTURED_JSON:
        return render_json(f, label)
    return render_nlr(f, label)


def parse_json(text: str) -> tuple[InterfaceFeatures, int | None]:
    """Invert :func:`render_json`; derived values come back at 4 decimals."""
    status = json.loads(text)["interface_status"]
    rx = status["input_features"]["received"]
    tx = status["input_features"]["sent"]
    keys = ("packets", "bytes", "packets_per_second", "bytes_per_second", "avg_packet_size")
    values = [float(rx[k]) for k in keys] + [float(tx[k]) for k in keys]
    return InterfaceFeatures(*values), status.get("output_label")


def has_label_token(text: str) -> bool:
    return "output_label" in text or "interface label" in text
