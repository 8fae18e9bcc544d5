"""Audio/video rate alignment and the latency model.

Video runs at 25 fps (40 ms per frame); audio analysis frames at 100/s
(10 ms hop). One video frame therefore spans exactly 4 audio frames and
640 samples at 16 kHz.

The visual encoder needs 2 future video frames before it can describe the
current one, so embeddings surface 2 frames late; together with the one
frame of capture blocking this pins the end-to-end algorithmic latency at
(lookahead + 1) * 40 ms = 120 ms.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ProtocolError

VIDEO_FPS = 25
VIDEO_FRAME_MS = 40
LOOKAHEAD_FRAMES = 2
RECEPTIVE_FIELD = 2 * LOOKAHEAD_FRAMES + 1  # 5-frame window, current in the middle
AUDIO_FRAMES_PER_VIDEO = 4
DEADLINE_MS = VIDEO_FRAME_MS


class LookaheadBuffer:
    """Reorders per-frame embeddings to respect the encoder lookahead.

    Frames are pushed in order 0, 1, 2, ...; pushing frame i releases the
    embedding for frame i - lookahead (the middle of the receptive-field
    window). The first `lookahead` pushes release nothing. Left context at
    stream start is implicitly zero, mirroring the encoder's zero padding.

    Single-owner mutable state: one producer, emissions consumed on push.
    """

    def __init__(self, lookahead: int = LOOKAHEAD_FRAMES,
                 capacity: int = RECEPTIVE_FIELD):
        if capacity < lookahead + 1:
            raise ValueError("capacity must cover the lookahead")
        self.lookahead = lookahead
        self.capacity = capacity
        self._slots: list[tuple[int, np.ndarray]] = []
        self._next_push = 0
        self.next_emit_index = 0

    def __len__(self) -> int:
        return len(self._slots)

    def push(self, embedding: np.ndarray, index: int):
        """Push frame `index`; returns (emit_index, embedding) or None."""
        if index != self._next_push:
            raise ProtocolError(
                f"video frames must arrive in order: expected {self._next_push}, "
                f"got {index}"
            )
        self._next_push += 1
        self._slots.append((index, np.asarray(embedding)))
        if len(self._slots) > self.capacity:
            self._slots.pop(0)
        if index < self.lookahead:
            return None
        emit_index = index - self.lookahead
        for idx, emb in self._slots:
            if idx == emit_index:
                self.next_emit_index = emit_index + 1
                return emit_index, emb
        raise ProtocolError(f"frame {emit_index} already evicted")  # unreachable at capacity >= lookahead+1


def upsample_to_audio_rate(vectors: np.ndarray,
                           factor: int = AUDIO_FRAMES_PER_VIDEO) -> np.ndarray:
    """Hold-upsample (N, D) video-rate vectors to (factor*N, D) audio rate."""
    vectors = np.asarray(vectors)
    return np.repeat(vectors, factor, axis=0)


def video_frame_for_audio_frame(t: int) -> int:
    return t // AUDIO_FRAMES_PER_VIDEO


def algorithmic_latency_ms(lookahead_frames: int = LOOKAHEAD_FRAMES,
                           video_frame_ms: int = VIDEO_FRAME_MS) -> int:
    """Lookahead plus one frame of capture blocking, in milliseconds."""
    if lookahead_frames < 0 or video_frame_ms < 0:
        raise ValueError("latency inputs must be >= 0")
    return (lookahead_frames + 1) * video_frame_ms


def algorithmic_latency_samples(sample_rate: int,
                                lookahead_frames: int = LOOKAHEAD_FRAMES,
                                video_frame_ms: int = VIDEO_FRAME_MS) -> int:
    return algorithmic_latency_ms(lookahead_frames, video_frame_ms) * sample_rate // 1000


@dataclass
class LatencyReport:
    video_frame_ms: int = VIDEO_FRAME_MS
    lookahead_frames: int = LOOKAHEAD_FRAMES
    deadline_ms: int = DEADLINE_MS
    per_frame_processing_ms: dict | None = None  # {"p50":..,"p95":..,"max":..} when measured

    @property
    def algorithmic_latency_ms(self) -> int:
        return algorithmic_latency_ms(self.lookahead_frames, self.video_frame_ms)

    def to_json(self) -> str:
        doc = {
            "video_frame_ms": self.video_frame_ms,
            "lookahead_frames": self.lookahead_frames,
            "algorithmic_latency_ms": self.algorithmic_latency_ms,
            "deadline_ms": self.deadline_ms,
        }
        if self.per_frame_processing_ms is not None:
            doc["per_frame_processing_ms"] = self.per_frame_processing_ms
        return json.dumps(doc)
