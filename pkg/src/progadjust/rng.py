"""Counter-based random streams.

A stream is a value: ``(master_seed, stream_id)`` keys a Philox4x64
generator whose counter starts at zero, so the same pair always yields the
same sequence regardless of process, thread, or call order.  Child streams
are derived by hashing labels into a new ``stream_id``.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

MASK64 = (1 << 64) - 1


def _label_bytes(label) -> bytes:
    if isinstance(label, bool) or not isinstance(label, (int, str)):
        raise TypeError(f"stream labels must be int or str, got {label!r}")
    if isinstance(label, int):
        return b"i" + (label & MASK64).to_bytes(8, "little")
    raw = label.encode("utf-8")
    return b"s" + struct.pack("<I", len(raw)) + raw


def derive_stream_id(parent: int, *labels) -> int:
    """Stable 64-bit hash of a parent id and a tuple of int/str labels."""
    h = hashlib.blake2b(digest_size=8, person=b"progadj-rng")
    h.update((parent & MASK64).to_bytes(8, "little"))
    for label in labels:
        h.update(_label_bytes(label))
    return int.from_bytes(h.digest(), "little")


@dataclass(frozen=True)
class RngStream:
    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_id"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or not 0 <= v <= MASK64:
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {v!r}")

    def child(self, *labels) -> "RngStream":
        return RngStream(self.master_seed, derive_stream_id(self.stream_id, *labels))

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of this stream."""
        bitgen = np.random.Philox(key=np.array([self.master_seed, self.stream_id], dtype=np.uint64))
        return np.random.Generator(bitgen)


def draw_standard_normal(stream: RngStream, count: int) -> np.ndarray:
    """``count`` i.i.d. N(0, 1) draws (numpy's ziggurat sampler)."""
    if count < 0:
        raise ValueError("count must be non-negative")
    return stream.generator().standard_normal(count)


def draw_uniform(stream: RngStream, shape) -> np.ndarray:
    return stream.generator().random(shape)


def draw_bivariate_normal(stream: RngStream, rho: float, scale: float, count: int) -> np.ndarray:
    """``count`` x 2 array of pairs with marginal SD ``scale`` and correlation ``rho``.

    Built as ``(u, rho*u + sqrt(1 - rho**2)*v) * scale``.
    """
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    if not scale > 0:
        raise ValueError(f"scale must be positive, got {scale}")
    if count < 0:
        raise ValueError("count must be non-negative")
    uv = stream.generator().standard_normal((2, count))
    u, v = uv
    second = rho * u + np.sqrt(1.0 - rho * rho) * v
    return np.column_stack([u, second]) * scale
