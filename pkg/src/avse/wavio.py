"""WAV reading and writing.

Supported on disk: PCM 16-bit signed LE and IEEE float32, mono, 16 kHz.
Multi-channel input is downmixed by averaging. Inputs at any other sample
rate are rejected; there is no resampler.

PCM16 uses a symmetric scale of 32768 both ways, so int16 -> float ->
int16 is the identity.
"""
from __future__ import annotations

import numpy as np
from scipy.io import wavfile

from .dsp import SAMPLE_RATE, Waveform
from .errors import FormatError

PCM_SCALE = 32768.0


def read_wav(path, expected_rate: int = SAMPLE_RATE) -> Waveform:
    """Load a WAV file as a float64 mono waveform in [-1, 1]."""
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise FormatError(f"{path}: not a readable WAV file ({exc})") from exc

    if data.dtype == np.int16:
        samples = data.astype(np.float64) / PCM_SCALE
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise FormatError(
            f"{path}: unsupported sample format {data.dtype}; "
            "only PCM16 and float32 are accepted"
        )

    if samples.ndim == 2:
        samples = samples.mean(axis=1)

    if expected_rate is not None and rate != expected_rate:
        raise FormatError(
            f"{path}: sample rate {rate} Hz, expected {expected_rate} Hz "
            "(no resampler in scope)"
        )
    return Waveform(samples, sample_rate=rate)


def write_wav(path, wave: Waveform, fmt: str = "pcm16") -> None:
    """Write a waveform as mono PCM16 or float32 WAV."""
    if fmt == "pcm16":
        q = np.clip(np.round(wave.samples * PCM_SCALE), -32768, 32767)
        wavfile.write(path, wave.sample_rate, q.astype(np.int16))
    elif fmt == "float32":
        wavfile.write(path, wave.sample_rate, wave.samples.astype(np.float32))
    else:
        raise ValueError(f"unknown WAV format {fmt!r}; use 'pcm16' or 'float32'")
