"""STFT analysis/synthesis kernel and mask arithmetic.

Framing is left-aligned and causal: frame t covers samples
[t*hop, t*hop + win_len) with no center padding, so computing frame t
never requires samples beyond t*hop + win_len. Synthesis is weighted
overlap-add with per-sample normalization by the accumulated squared
window, which reconstructs the input exactly wherever that accumulation
is not vanishingly small (in practice: everywhere but the outermost
couple of samples of the stream).

All math runs in float64. Everything here is a pure function; there is
no shared state.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SAMPLE_RATE = 16000
WIN_LEN = 400
HOP = 160
NFFT = 512
BINS = NFFT // 2 + 1
COMPRESSION_EXP = 0.3

# Near stream edges only the tail of a single window covers a sample; the
# floor keeps the WOLA division from blowing up there.
WOLA_FLOOR = 1e-8


@dataclass
class Waveform:
    """Mono time-domain signal, nominal amplitude range [-1, 1]."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError(f"waveform must be mono 1-D, got shape {self.samples.shape}")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("waveform contains NaN or Inf")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass
class Spectrogram:
    """Complex T-F representation: T frames x 257 nonnegative-frequency bins."""

    frames: np.ndarray
    hop: int = HOP
    win_len: int = WIN_LEN
    nfft: int = NFFT
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.complex128)
        bins = self.nfft // 2 + 1
        if self.frames.ndim != 2 or self.frames.shape[1] != bins:
            raise ValueError(
                f"spectrogram frames must be (T, {bins}), got {self.frames.shape}"
            )
        if not np.all(np.isfinite(self.frames)):
            raise ValueError("spectrogram contains NaN or Inf")

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    def magnitude(self) -> np.ndarray:
        return np.abs(self.frames)


def make_hann_window(length: int) -> np.ndarray:
    """Periodic Hann window: w[k] = 0.5 * (1 - cos(2*pi*k/length))."""
    if length < 2:
        raise ValueError(f"window length must be >= 2, got {length}")
    k = np.arange(length, dtype=np.float64)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * k / length))


def frame_count(num_samples: int, win_len: int = WIN_LEN, hop: int = HOP) -> int:
    """Number of full analysis frames that fit in num_samples."""
    if num_samples < win_len:
        return 0
    return 1 + (num_samples - win_len) // hop


def analyze_frames(frames: np.ndarray, window: np.ndarray, nfft: int = NFFT) -> np.ndarray:
    """Window + zero-pad + rfft for a (k, win_len) block of raw frames."""
    return np.fft.rfft(frames * window, n=nfft, axis=-1)


def stft(wave: Waveform, win_len: int = WIN_LEN, hop: int = HOP, nfft: int = NFFT) -> Spectrogram:
    """Short-time Fourier transform with left-aligned, unpadded framing."""
    x = wave.samples
    t = frame_count(len(x), win_len, hop)
    window = make_hann_window(win_len)
    if t == 0:
        return Spectrogram(
            np.zeros((0, nfft // 2 + 1), dtype=np.complex128),
            hop=hop, win_len=win_len, nfft=nfft, sample_rate=wave.sample_rate,
        )
    idx = hop * np.arange(t)[:, None] + np.arange(win_len)[None, :]
    spec = analyze_frames(x[idx], window, nfft)
    return Spectrogram(spec, hop=hop, win_len=win_len, nfft=nfft,
                       sample_rate=wave.sample_rate)


def compress(mag: np.ndarray, p: float = COMPRESSION_EXP) -> np.ndarray:
    """Power-law compression of a nonnegative magnitude array."""
    mag = np.asarray(mag, dtype=np.float64)
    if not 0.0 < p <= 1.0:
        raise ValueError(f"compression exponent must be in (0, 1], got {p}")
    if mag.size and mag.min() < 0.0:
        raise ValueError("magnitudes must be nonnegative")
    return mag ** p


def apply_mask(mask: np.ndarray, noisy: Spectrogram) -> Spectrogram:
    """Scale the noisy spectrogram bin-wise; the noisy phase is untouched."""
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != noisy.frames.shape:
        raise ValueError(
            f"mask shape {mask.shape} does not match spectrogram {noisy.frames.shape}"
        )
    return Spectrogram(mask * noisy.frames, hop=noisy.hop, win_len=noisy.win_len,
                       nfft=noisy.nfft, sample_rate=noisy.sample_rate)


def synthesize_frames(spec_frames: np.ndarray, window: np.ndarray,
                      win_len: int = WIN_LEN, nfft: int = NFFT) -> np.ndarray:
    """irfft + truncate to window support + synthesis window, per frame."""
    y = np.fft.irfft(spec_frames, n=nfft, axis=-1)[..., :win_len]
    return y * window


def istft(spec: Spectrogram) -> Waveform:
    """Weighted overlap-add inverse with per-sample window-power normalization.

    Output length is (T-1)*hop + win_len. An empty spectrogram yields an
    empty waveform.
    """
    t = spec.num_frames
    if t == 0:
        return Waveform(np.zeros(0), sample_rate=spec.sample_rate)
    window = make_hann_window(spec.win_len)
    segs = synthesize_frames(spec.frames, window, spec.win_len, spec.nfft)
    out_len = (t - 1) * spec.hop + spec.win_len
    num = np.zeros(out_len)
    den = np.zeros(out_len)
    wsq = window * window
    for i in range(t):
        start = i * spec.hop
        num[start:start + spec.win_len] += segs[i]
        den[start:start + spec.win_len] += wsq
    return Waveform(num / np.maximum(den, WOLA_FLOOR), sample_rate=spec.sample_rate)
