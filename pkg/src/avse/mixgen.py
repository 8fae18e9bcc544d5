"""SNR-controlled mixture synthesis for training-style evaluation data.

Mixtures are 5-second cuts: a target segment plus an interfering segment
scaled to a requested SNR drawn uniformly in [-5, +5] dB. If the sum
clips, all three stems are divided by the same peak factor, which keeps
additivity and the achieved SNR intact.

Randomness comes from the SplitMix64 generator in avse.rng; per record the
draw order is fixed: target index, interferer index, SNR, target offset,
interferer offset. Same manifest + seed => identical specs and mixtures.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .dsp import SAMPLE_RATE, Waveform
from .errors import FormatError
from .rng import SplitMix64
from .wavio import read_wav, write_wav

SNR_RANGE_DB = (-5.0, 5.0)
CLIP_DURATION_S = 5.0


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    duration_s: float


@dataclass(frozen=True)
class MixtureSpec:
    target_path: str
    interferer_path: str
    snr_db: float
    target_offset_s: float
    interferer_offset_s: float
    duration_s: float = CLIP_DURATION_S
    seed: int = 0


@dataclass
class MixtureRecord:
    mixture: Waveform
    target: Waveform
    interferer_scaled: Waveform
    achieved_snr_db: float
    peak_factor: float
    spec: MixtureSpec


def measure_snr(target, noise) -> float:
    """10*log10 of the energy ratio; both operands must carry energy."""
    t = np.asarray(target, dtype=np.float64)
    n = np.asarray(noise, dtype=np.float64)
    et = float(np.sum(t * t))
    en = float(np.sum(n * n))
    if et == 0.0 or en == 0.0:
        raise ValueError("SNR undefined: zero-energy operand")
    return 10.0 * math.log10(et / en)


def scale_noise_for_snr(target, noise, snr_db: float) -> np.ndarray:
    """Scale noise so that measure_snr(target, scaled) == snr_db."""
    t = np.asarray(target, dtype=np.float64)
    n = np.asarray(noise, dtype=np.float64)
    et = float(np.sum(t * t))
    en = float(np.sum(n * n))
    if et == 0.0 or en == 0.0:
        raise ValueError("SNR undefined: zero-energy operand")
    g = math.sqrt(et / (en * 10.0 ** (snr_db / 10.0)))
    return g * n


def read_manifest(path) -> list[ManifestEntry]:
    """Parse `path<TAB>duration_s` lines; '#' starts a comment."""
    entries = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise FormatError(f"{path}:{lineno}: expected `path<TAB>duration_s`")
        try:
            entries.append(ManifestEntry(parts[0], float(parts[1])))
        except ValueError:
            raise FormatError(f"{path}:{lineno}: bad duration {parts[1]!r}")
    return entries


def draw_specs(manifest: list[ManifestEntry], count: int, seed: int) -> list[MixtureSpec]:
    """Draw `count` reproducible mixture specs from the manifest."""
    if len(manifest) < 2:
        raise ValueError("manifest must list at least 2 sources")
    for e in manifest:
        if e.duration_s < CLIP_DURATION_S:
            raise ValueError(f"{e.path}: source shorter than {CLIP_DURATION_S} s")
    rng = SplitMix64(seed)
    specs = []
    for _ in range(count):
        ti = rng.index(len(manifest))
        k = rng.index(len(manifest) - 1)
        ii = k if k < ti else k + 1  # interferer always differs from target
        snr = rng.uniform_in(*SNR_RANGE_DB)
        t_off = rng.uniform() * (manifest[ti].duration_s - CLIP_DURATION_S)
        i_off = rng.uniform() * (manifest[ii].duration_s - CLIP_DURATION_S)
        specs.append(MixtureSpec(
            target_path=manifest[ti].path,
            interferer_path=manifest[ii].path,
            snr_db=snr,
            target_offset_s=t_off,
            interferer_offset_s=i_off,
            seed=seed,
        ))
    return specs


def _cut(wave: Waveform, offset_s: float, duration_s: float, what: str) -> np.ndarray:
    start = int(round(offset_s * wave.sample_rate))
    n = int(round(duration_s * wave.sample_rate))
    if start < 0 or start + n > len(wave):
        raise ValueError(
            f"{what}: clip too short for offset {offset_s:.3f}s + {duration_s}s "
            f"(have {len(wave)} samples)"
        )
    return wave.samples[start:start + n]


def mix_segments(target_seg: np.ndarray, interferer_seg: np.ndarray,
                 snr_db: float, spec: MixtureSpec | None = None,
                 sample_rate: int = SAMPLE_RATE) -> MixtureRecord:
    """Core mixing step on already-cut, equal-length segments."""
    if len(target_seg) != len(interferer_seg):
        raise ValueError("segments must have equal length")
    scaled = scale_noise_for_snr(target_seg, interferer_seg, snr_db)
    mixture = target_seg + scaled
    peak = float(np.max(np.abs(mixture))) if len(mixture) else 0.0
    factor = peak if peak > 1.0 else 1.0
    if factor > 1.0:
        target_seg = target_seg / factor
        scaled = scaled / factor
        mixture = mixture / factor
    return MixtureRecord(
        mixture=Waveform(mixture, sample_rate),
        target=Waveform(np.array(target_seg), sample_rate),
        interferer_scaled=Waveform(scaled, sample_rate),
        achieved_snr_db=measure_snr(target_seg, scaled),
        peak_factor=factor,
        spec=spec or MixtureSpec("<memory>", "<memory>", snr_db, 0.0, 0.0),
    )


def make_mixture(spec: MixtureSpec) -> MixtureRecord:
    """Load, cut, scale, and sum one mixture from WAV sources."""
    target = read_wav(spec.target_path)
    interferer = read_wav(spec.interferer_path)
    if target.sample_rate != interferer.sample_rate:
        raise ValueError(
            f"sample rate mismatch: {spec.target_path} at {target.sample_rate}, "
            f"{spec.interferer_path} at {interferer.sample_rate}"
        )
    t_seg = _cut(target, spec.target_offset_s, spec.duration_s, spec.target_path)
    i_seg = _cut(interferer, spec.interferer_offset_s, spec.duration_s, spec.interferer_path)
    return mix_segments(t_seg, i_seg, spec.snr_db, spec=spec,
                        sample_rate=target.sample_rate)


def sidecar_line(record: MixtureRecord, stem_paths: dict) -> str:
    """One JSON metadata line describing a written record."""
    doc = {
        "target_path": record.spec.target_path,
        "interferer_path": record.spec.interferer_path,
        "snr_db": record.spec.snr_db,
        "achieved_snr_db": record.achieved_snr_db,
        "target_offset_s": record.spec.target_offset_s,
        "interferer_offset_s": record.spec.interferer_offset_s,
        "peak_factor": record.peak_factor,
        "seed": record.spec.seed,
    }
    doc.update(stem_paths)
    return json.dumps(doc)


def generate_batch(manifest: list[ManifestEntry], count: int, seed: int,
                   outdir) -> list[str]:
    """Write `count` mixtures plus a JSONL sidecar; returns sidecar lines."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    specs = draw_specs(manifest, count, seed)
    lines = []
    for i, spec in enumerate(specs):
        record = make_mixture(spec)
        stems = {
            "mixture_wav": str(outdir / f"mix_{i:05d}.wav"),
            "target_wav": str(outdir / f"target_{i:05d}.wav"),
            "interferer_wav": str(outdir / f"interf_{i:05d}.wav"),
        }
        write_wav(stems["mixture_wav"], record.mixture)
        write_wav(stems["target_wav"], record.target)
        write_wav(stems["interferer_wav"], record.interferer_scaled)
        lines.append(sidecar_line(record, stems))
    if lines:
        (outdir / "mixtures.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return lines
