"""Embedding providers and vector math.

All reductions use a fixed left-to-right order (``np.cumsum`` or ``math.fsum``)
instead of BLAS kernels, so similarity scores are bit-identical across
machines and match a naive Python scan exactly.
"""

from __future__ import annotations

import dataclasses
import enum
import functools
import hashlib
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np
import requests

from vccscan.errors import EmptyText, ProviderUnavailable, ZeroVector

logger = logging.getLogger(__name__)

NORM_TOLERANCE = 1e-6
DEFAULT_DIMENSION = 512
RETRY_ATTEMPTS = 3
RETRY_BASE_DELAY = 1.0


class ProviderKind(str, enum.Enum):
    REMOTE = "REMOTE"
    LOCAL_DETERMINISTIC = "LOCAL_DETERMINISTIC"


@dataclasses.dataclass(frozen=True)
class EmbedProviderConfig:
    kind: ProviderKind = ProviderKind.LOCAL_DETERMINISTIC
    endpoint_url: str = ""
    model_name: str = ""
    api_key_env: str = "EMBED_API_KEY"
    dimension: int = DEFAULT_DIMENSION
    batch_size: int = 32
    max_in_flight: int = 4
    timeout: float = 60.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ProviderKind(self.kind))
        if self.dimension < 8:
            raise ValueError("dimension must be >= 8")
        if self.batch_size < 1 or self.max_in_flight < 1:
            raise ValueError("batch_size and max_in_flight must be >= 1")

    @classmethod
    def from_json(cls, obj: dict) -> "EmbedProviderConfig":
        fields = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in obj.items() if k in fields})

    def fingerprint(self) -> str:
        if self.kind is ProviderKind.LOCAL_DETERMINISTIC:
            return f"local-trigram-d{self.dimension}"
        return f"remote:{self.model_name}@{self.endpoint_url}"


@dataclasses.dataclass(frozen=True, eq=False)
class EmbeddingVector:
    values: np.ndarray
    source_id: str = ""

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 1:
            raise ValueError("embedding must be one-dimensional")
        if not np.all(np.isfinite(arr)):
            raise ValueError("embedding contains non-finite entries")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    def to_json(self) -> dict:
        return {"source_id": self.source_id, "dim": self.dim, "values": [float(x) for x in self.values]}

    @classmethod
    def from_json(cls, obj: dict) -> "EmbeddingVector":
        values = obj["values"]
        if len(values) != int(obj.get("dim", len(values))):
            raise ValueError(f"embedding {obj.get('source_id')!r}: dim field disagrees with values")
        return cls(np.asarray(values, dtype=np.float64), obj.get("source_id", ""))


def norm(v) -> float:
    v = np.asarray(v, dtype=np.float64)
    return math.sqrt(math.fsum((v * v).tolist()))


def l2_normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    n = norm(v)
    if n == 0.0:
        raise ZeroVector("cannot normalize a zero vector")
    return v / n


def dot(u, v) -> float:
    """Left-to-right sum of elementwise products."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"shape mismatch {u.shape} vs {v.shape}")
    if u.size == 0:
        return 0.0
    return float(np.cumsum(u * v)[-1])


def cosine(u, v) -> float:
    """Cosine of two unit vectors (their dot product), clamped to [-1, 1]."""
    if isinstance(u, EmbeddingVector):
        u = u.values
    if isinstance(v, EmbeddingVector):
        v = v.values
    return min(1.0, max(-1.0, dot(u, v)))


@functools.lru_cache(maxsize=1 << 16)
def trigram_bucket(trigram: str, dimension: int) -> int:
    digest = hashlib.blake2b(trigram.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") % dimension


def local_embedding(text: str, dimension: int = DEFAULT_DIMENSION) -> np.ndarray:
    """Hashed character-trigram term frequencies, L2-normalized."""
    if len(text) < 3:
        raise EmptyText(f"text has no character trigrams: {text!r}")
    counts = np.zeros(dimension, dtype=np.float64)
    for i in range(len(text) - 2):
        counts[trigram_bucket(text[i:i + 3], dimension)] += 1.0
    return l2_normalize(counts)


def _api_key(config: EmbedProviderConfig) -> str:
    key = os.environ.get(config.api_key_env or "EMBED_API_KEY", "")
    if not key:
        raise ProviderUnavailable(f"environment variable {config.api_key_env} is not set")
    return key


def post_json_with_retry(url: str, payload: dict, headers: dict, timeout: float,
                         sleep: Callable[[float], None] = time.sleep) -> dict:
    """POST with up to three attempts, backing off 1s then 2s on transport
    errors, HTTP 429 and 5xx. Other HTTP errors fail immediately."""
    last = "no attempt made"
    for attempt in range(RETRY_ATTEMPTS):
        if attempt:
            sleep(RETRY_BASE_DELAY * 2 ** (attempt - 1))
        try:
            resp = requests.post(url, json=payload, headers=headers, timeout=timeout)
        except requests.RequestException as exc:
            last = f"transport error: {exc}"
            continue
        if resp.status_code == 429 or resp.status_code >= 500:
            last = f"HTTP {resp.status_code}"
            continue
        if resp.status_code >= 400:
            raise ProviderUnavailable(f"{url}: HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()
        except ValueError as exc:
            raise ProviderUnavailable(f"{url}: response is not JSON") from exc
    raise ProviderUnavailable(f"{url}: giving up after {RETRY_ATTEMPTS} attempts ({last})")


def _remote_batch(config: EmbedProviderConfig, key: str, texts: Sequence[str], sleep) -> list[np.ndarray]:
    body = post_json_with_retry(
        config.endpoint_url,
        {"model": config.model_name, "inputs": list(texts)},
        {"Authorization": f"Bearer {key}"},
        config.timeout,
        sleep,
    )
    vectors = body.get("vectors") if isinstance(body, dict) else None
    if not isinstance(vectors, list) or len(vectors) != len(texts):
        raise ProviderUnavailable("embedding response lacks one vector per input")
    return [l2_normalize(np.asarray(v, dtype=np.float64)) for v in vectors]


def embed_batch(config: EmbedProviderConfig, texts: Sequence[str], source_ids: Sequence[str] | None = None,
                sleep: Callable[[float], None] = time.sleep) -> list[EmbeddingVector]:
    """Embed preprocessed texts, one unit-norm vector per text in input order."""
    if not texts:
        raise EmptyText("no texts to embed")
    if source_ids is None:
        source_ids = [""] * len(texts)
    if len(source_ids) != len(texts):
        raise ValueError("source_ids and texts differ in length")
    for text in texts:
        if not text.strip():
            raise EmptyText("cannot embed an empty text")
    if config.kind is ProviderKind.LOCAL_DETERMINISTIC:
        arrays = [local_embedding(t, config.dimension) for t in texts]
    else:
        key = _api_key(config)
        batches = [texts[i:i + config.batch_size] for i in range(0, len(texts), config.batch_size)]
        with ThreadPoolExecutor(max_workers=config.max_in_flight) as pool:
            results = list(pool.map(lambda b: _remote_batch(config, key, b, sleep), batches))
        arrays = [v for batch in results for v in batch]
    return [EmbeddingVector(a, sid) for a, sid in zip(arrays, source_ids)]
