"""Prompt classification: a chat-completion client and a distance-margin oracle."""

from __future__ import annotations

import logging
import os
import re
import time
from dataclasses import dataclass

import numpy as np
import requests

from .exceptions import RemoteUnavailable, UnparseableReply
from .prompt import Prompt
from .retrieval import RetrievedContext

logger = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r"[A-Za-z0-9]+")


@dataclass(frozen=True)
class ClassificationResult:
    label: int
    score: float | None
    latency_s: float
    source: str  # "remote" or "oracle"


@dataclass(frozen=True)
class ModelConfig:
    endpoint: str = ""
    model: str = "gemma-4-31b-it"
    temperature: float = 0.0
    max_tokens: int = 4
    timeout_s: float = 60.0
    retries: int = 2
    token_env: str = "CARPETGUARD_LLM_TOKEN"

    def __post_init__(self):
        if not self.timeout_s > 0:
            raise ValueError("timeout_s must be positive")
        if self.retries < 0:
            raise ValueError("retries must be non-negative")


def parse_label(reply: str) -> int:
    """Extract the binary label from a model reply.

    An exact ``"0"``/``"1"`` (after stripping) wins; otherwise the first
    standalone alphanumeric token equal to ``0`` or ``1`` is taken, so
    ``"10"`` does not count.
    """
    stripped = reply.strip()
    if stripped in ("0", "1"):
        return int(stripped)
    for token in _TOKEN_RE.findall(stripped):
        if token in ("0", "1"):
            return int(token)
    raise UnparseableReply(reply)


def _reply_text(payload) -> str:
    try:
        return payload["choices"][0]["message"]["content"] or ""
    except (KeyError, IndexError, TypeError):
        pass
    if isinstance(payload, dict) and isinstance(payload.get("content"), str):
        return payload["content"]
    raise UnparseableReply(repr(payload)[:200])


def classify_remote(p: Prompt, cfg: ModelConfig, session: requests.Session | None = None
                    ) -> ClassificationResult:
    """Send the prompt as a single user message and parse the reply."""
    session = session or requests
    body = {
        "model": cfg.model,
        "messages": [{"role": "user", "content": p.text}],
        "temperature": cfg.temperature,
        "max_tokens": cfg.max_tokens,
    }
    headers = {"Content-Type": "application/json"}
    token = os.environ.get(cfg.token_env)
    if token:
        headers["Authorization"] = f"Bearer {token}"
    last_error = None
    for attempt in range(cfg.retries + 1):
        start = time.perf_counter()
        try:
            resp = session.post(cfg.endpoint, json=body, headers=headers, timeout=cfg.timeout_s)
            resp.raise_for_status()
            payload = resp.json()
        except (requests.RequestException, ValueError) as exc:
            last_error = exc
            logger.warning("chat request attempt %d/%d failed: %s", attempt + 1, cfg.retries + 1, exc)
            continue
        latency = time.perf_counter() - start
        return ClassificationResult(parse_label(_reply_text(payload)), None, latency, "remote")
    raise RemoteUnavailable(f"{cfg.endpoint} unavailable after {cfg.retries + 1} attempts: {last_error}")


def oracle_score(ctx: RetrievedContext) -> float:
    """Mean benign distance minus mean attack distance; positive leans attack."""
    return float(np.mean(ctx.benign_distances) - np.mean(ctx.attack_distances))


def classify_oracle(ctx: RetrievedContext) -> ClassificationResult:
    """Label 1 when the query sits closer to attack neighbours; ties go benign.

    No request is made, so latency is reported as 0 to keep reports
    reproducible.
    """
    s = oracle_score(ctx)
    return ClassificationResult(int(s > 0), s, 0.0, "oracle")
