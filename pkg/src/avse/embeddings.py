"""Lip-movement embedding sources.

The visual encoder itself is an external, pluggable component; this module
only deals in its outputs: sequences of per-video-frame embedding vectors
at 25 fps, either loaded from an RVE1 file or generated synthetically for
tests and benchmarks.

RVE1 layout (all integers little-endian):

    bytes 0..3    magic "RVE1"
    bytes 4..7    u32 version (1)
    bytes 8..11   u32 fps
    bytes 12..15  u32 N (frame count)
    bytes 16..19  u32 D (embedding dimension)
    bytes 20..    N * D float32, row-major

The synthetic generator is a closed-form function of its arguments, not a
PRNG stream, so the same call is reproducible everywhere.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError

MAGIC = b"RVE1"
VERSION = 1
DEFAULT_FPS = 25
DEFAULT_DIM = 512
HEADER = struct.Struct("<4sIIII")


@dataclass
class VisualEmbeddingSequence:
    """Per-video-frame embeddings at a fixed frame rate."""

    vectors: np.ndarray  # (N, D) float32
    fps: int = DEFAULT_FPS
    source_id: str = ""

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float32)
        if self.vectors.ndim != 2:
            raise ValueError(f"embedding vectors must be (N, D), got {self.vectors.shape}")
        if not np.all(np.isfinite(self.vectors)):
            raise ValueError("embedding sequence contains NaN or Inf")

    def __len__(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True)
class EmbeddingProviderDescriptor:
    kind: str  # "file" | "synthetic"
    dim: int = DEFAULT_DIM
    lookahead: int = 2

    def __post_init__(self):
        if self.kind not in ("file", "synthetic"):
            raise ValueError(f"unknown provider kind {self.kind!r}")
        if self.lookahead < 0:
            raise ValueError("lookahead must be >= 0")

    @property
    def receptive_field(self) -> int:
        return 2 * self.lookahead + 1


def synthetic_embeddings(n_frames: int, dim: int = DEFAULT_DIM,
                         seed: int = 0) -> VisualEmbeddingSequence:
    """Deterministic test embeddings: v[i][j] = sin(0.1*(i+1)*(j+1) + seed)."""
    if n_frames < 0 or dim < 1:
        raise ValueError("need n_frames >= 0 and dim >= 1")
    i = np.arange(1, n_frames + 1, dtype=np.float64)
    j = np.arange(1, dim + 1, dtype=np.float64)
    v = np.sin(0.1 * np.outer(i, j) + float(seed)).astype(np.float32)
    if n_frames == 0:
        v = np.zeros((0, dim), dtype=np.float32)
    return VisualEmbeddingSequence(v, fps=DEFAULT_FPS,
                                   source_id=f"synthetic:{seed}")


def load_embedding_file(path) -> VisualEmbeddingSequence:
    """Decode an RVE1 file; errors carry the byte offset of the problem."""
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < HEADER.size:
        raise FormatError(f"{path}: truncated header, {len(raw)} bytes at offset 0")
    magic, version, fps, n, d = HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r} at offset 0")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version} at offset 4")
    if d < 1:
        raise FormatError(f"{path}: dimension {d} at offset 16 must be >= 1")
    need = n * d * 4
    body = raw[HEADER.size:]
    if len(body) != need:
        raise FormatError(
            f"{path}: expected {need} payload bytes at offset {HEADER.size}, "
            f"got {len(body)}"
        )
    vectors = np.frombuffer(body, dtype="<f4").reshape(n, d)
    return VisualEmbeddingSequence(np.array(vectors), fps=fps, source_id=str(path))


def write_embedding_file(path, seq: VisualEmbeddingSequence) -> None:
    """Write an RVE1 file; exact inverse of load_embedding_file."""
    n, d = seq.vectors.shape
    with open(path, "wb") as f:
        f.write(HEADER.pack(MAGIC, VERSION, seq.fps, n, d))
        f.write(seq.vectors.astype("<f4").tobytes(order="C"))
