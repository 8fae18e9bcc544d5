"""Model weight container, the RVW1 file format, and fixture presets.

RVW1 layout (integers little-endian):

    magic "RVW1"
    u32 version (1)
    u32 metadata length, then that many bytes of UTF-8 "key=value\\n" lines
    u32 tensor count
    per tensor: u16 name length, name (UTF-8), u8 ndim, ndim * u32 dims,
                then prod(dims) float32 values, row-major

Serialization is canonical: fixed metadata key order, tensors sorted by
name. save -> load -> save is byte-identical.

Metadata drives every dimension; nothing about the network size is baked
into code. `audio_embed_dim` must equal the flattened (channels x bins)
output of the conv stack described by `conv_channels`/`conv_freq_strides`.

The LSTM weight layout is fixed: rows of W_ih/W_hh and entries of the
biases are the four gates stacked in the order (input, forget, cell,
output), each `lstm_hidden` wide. Batch-norm statistics are stored raw
(gamma, beta, mean, var) and folded to an affine transform at load time
with no epsilon, so var must be strictly positive.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .dsp import BINS
from .embeddings import DEFAULT_DIM
from .errors import FormatError
from .rng import SplitMix64

MAGIC = b"RVW1"
VERSION = 1
NUM_CONV_LAYERS = 15
CONV_KERNEL = 3  # 3x3, stride 1 in time, left-padded in time only

_CONV_PARTS = ("kernel", "bias", "bn_gamma", "bn_beta", "bn_mean", "bn_var")
_METADATA_KEYS = ("audio_embed_dim", "visual_dim", "lstm_hidden", "bins",
                  "conv_channels", "conv_freq_strides", "fc_hidden")


def conv_freq_chain(strides) -> list[int]:
    """Frequency-bin count entering each layer, plus the final output size.

    Frequency axis uses 'same' padding of 1: f_out = (f_in - 1) // stride + 1.
    """
    chain = [BINS]
    for s in strides:
        chain.append((chain[-1] - 1) // s + 1)
    return chain


@dataclass(frozen=True)
class ModelConfig:
    """Every free size of the network, as recorded in file metadata."""

    conv_channels: tuple = tuple([16] * 5 + [32] * 5 + [64] * 5)
    conv_freq_strides: tuple = tuple(2 if (i + 1) % 5 == 0 else 1 for i in range(NUM_CONV_LAYERS))
    lstm_hidden: int = 512
    visual_dim: int = DEFAULT_DIM
    fc_hidden: tuple = (512, 512)
    bins: int = BINS

    def __post_init__(self):
        if len(self.conv_channels) != NUM_CONV_LAYERS:
            raise ValueError(f"conv plan must have {NUM_CONV_LAYERS} layers")
        if len(self.conv_freq_strides) != NUM_CONV_LAYERS:
            raise ValueError(f"stride plan must have {NUM_CONV_LAYERS} layers")
        if len(self.fc_hidden) != 2:
            raise ValueError("fc_hidden lists the widths of fc1 and fc2")

    @property
    def freq_chain(self) -> list[int]:
        return conv_freq_chain(self.conv_freq_strides)

    @property
    def audio_embed_dim(self) -> int:
        """Flattened conv output: last channel count x last frequency size."""
        return self.conv_channels[-1] * self.freq_chain[-1]

    @property
    def lstm_input_dim(self) -> int:
        return self.audio_embed_dim + self.visual_dim


# Compact plan used by the zero/random/tiny fixture presets: small enough to
# run far inside the per-frame budget on one CPU core.
TINY_CONFIG = ModelConfig(
    conv_channels=tuple([8] * 5 + [12] * 5 + [16] * 5),
    lstm_hidden=128,
    fc_hidden=(128, 128),
)


@dataclass
class ModelWeights:
    config: ModelConfig
    tensors: dict

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def validate(self) -> None:
        """Check presence and mutual consistency of every tensor."""
        cfg = self.config
        if cfg.bins != BINS:
            raise FormatError(f"metadata bins={cfg.bins}, engine requires {BINS}")
        expected = expected_shapes(cfg)
        for name, shape in expected.items():
            if name not in self.tensors:
                raise FormatError(f"missing tensor {name}")
            got = self.tensors[name].shape
            if tuple(got) != shape:
                raise FormatError(f"tensor {name}: shape {got}, expected {shape}")
        for name in self.tensors:
            if name not in expected:
                raise FormatError(f"unexpected tensor {name}")
        for i in range(1, NUM_CONV_LAYERS + 1):
            var = self.tensors[f"conv{i}.bn_var"]
            if var.size and var.min() <= 0.0:
                raise FormatError(f"tensor conv{i}.bn_var must be strictly positive")


def expected_shapes(cfg: ModelConfig) -> dict:
    shapes = {}
    in_ch = 1
    for i, out_ch in enumerate(cfg.conv_channels, start=1):
        shapes[f"conv{i}.kernel"] = (out_ch, in_ch, CONV_KERNEL, CONV_KERNEL)
        for part in _CONV_PARTS[1:]:
            shapes[f"conv{i}.{part}"] = (out_ch,)
        in_ch = out_ch
    h = cfg.lstm_hidden
    shapes["lstm.W_ih"] = (4 * h, cfg.lstm_input_dim)
    shapes["lstm.W_hh"] = (4 * h, h)
    shapes["lstm.b_ih"] = (4 * h,)
    shapes["lstm.b_hh"] = (4 * h,)
    fc1, fc2 = cfg.fc_hidden
    shapes["fc1.W"] = (fc1, h)
    shapes["fc1.b"] = (fc1,)
    shapes["fc2.W"] = (fc2, fc1)
    shapes["fc2.b"] = (fc2,)
    shapes["fc3.W"] = (cfg.bins, fc2)
    shapes["fc3.b"] = (cfg.bins,)
    return shapes


# ---------------------------------------------------------------------------
# RVW1 serialization
# ---------------------------------------------------------------------------

def _metadata_bytes(cfg: ModelConfig) -> bytes:
    values = {
        "audio_embed_dim": str(cfg.audio_embed_dim),
        "visual_dim": str(cfg.visual_dim),
        "lstm_hidden": str(cfg.lstm_hidden),
        "bins": str(cfg.bins),
        "conv_channels": ",".join(str(c) for c in cfg.conv_channels),
        "conv_freq_strides": ",".join(str(s) for s in cfg.conv_freq_strides),
        "fc_hidden": ",".join(str(w) for w in cfg.fc_hidden),
    }
    return "".join(f"{k}={values[k]}\n" for k in _METADATA_KEYS).encode("utf-8")


def _parse_metadata(blob: bytes, path) -> ModelConfig:
    pairs = {}
    for line in blob.decode("utf-8").splitlines():
        if not line.strip():
            continue
        if "=" not in line:
            raise FormatError(f"{path}: malformed metadata line {line!r}")
        k, v = line.split("=", 1)
        pairs[k] = v
    missing = [k for k in _METADATA_KEYS if k not in pairs]
    if missing:
        raise FormatError(f"{path}: metadata missing keys {missing}")
    try:
        cfg = ModelConfig(
            conv_channels=tuple(int(c) for c in pairs["conv_channels"].split(",")),
            conv_freq_strides=tuple(int(s) for s in pairs["conv_freq_strides"].split(",")),
            lstm_hidden=int(pairs["lstm_hidden"]),
            visual_dim=int(pairs["visual_dim"]),
            fc_hidden=tuple(int(w) for w in pairs["fc_hidden"].split(",")),
            bins=int(pairs["bins"]),
        )
    except ValueError as exc:
        raise FormatError(f"{path}: bad metadata ({exc})") from exc
    declared = int(pairs["audio_embed_dim"])
    if declared != cfg.audio_embed_dim:
        raise FormatError(
            f"{path}: audio_embed_dim={declared} inconsistent with conv plan "
            f"(flattened conv output is {cfg.audio_embed_dim})"
        )
    return cfg


def save_model(weights: ModelWeights, path) -> None:
    """Write canonical RVW1; inverse of load_model."""
    weights.validate()
    meta = _metadata_bytes(weights.config)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(struct.pack("<I", len(meta)))
        f.write(meta)
        f.write(struct.pack("<I", len(weights.tensors)))
        for name in sorted(weights.tensors):
            if not name:
                raise FormatError("tensor names must be non-empty")
            data = np.ascontiguousarray(weights.tensors[name], dtype="<f4")
            nb = name.encode("utf-8")
            f.write(struct.pack("<H", len(nb)))
            f.write(nb)
            f.write(struct.pack("<B", data.ndim))
            f.write(struct.pack(f"<{data.ndim}I", *data.shape))
            f.write(data.tobytes(order="C"))


def load_model(path) -> ModelWeights:
    """Read and validate an RVW1 file."""
    with open(path, "rb") as f:
        raw = f.read()
    off = 0

    def take(n: int, what: str) -> bytes:
        nonlocal off
        if off + n > len(raw):
            raise FormatError(f"{path}: truncated reading {what} at offset {off}")
        chunk = raw[off:off + n]
        off += n
        return chunk

    if take(4, "magic") != MAGIC:
        raise FormatError(f"{path}: bad magic at offset 0")
    version = struct.unpack("<I", take(4, "version"))[0]
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version} at offset 4")
    meta_len = struct.unpack("<I", take(4, "metadata length"))[0]
    cfg = _parse_metadata(take(meta_len, "metadata"), path)
    count = struct.unpack("<I", take(4, "tensor count"))[0]

    tensors = {}
    for _ in range(count):
        name_len = struct.unpack("<H", take(2, "tensor name length"))[0]
        if name_len == 0:
            raise FormatError(f"{path}: empty tensor name at offset {off - 2}")
        name = take(name_len, "tensor name").decode("utf-8")
        ndim = struct.unpack("<B", take(1, f"{name} ndim"))[0]
        dims = struct.unpack(f"<{ndim}I", take(4 * ndim, f"{name} dims"))
        size = int(np.prod(dims, dtype=np.int64)) if ndim else 1
        data = np.frombuffer(take(4 * size, f"{name} data"), dtype="<f4")
        if name in tensors:
            raise FormatError(f"{path}: duplicate tensor {name}")
        tensors[name] = data.reshape(dims).copy()
    if off != len(raw):
        raise FormatError(
            f"{path}: {len(raw) - off} trailing bytes at offset {off} "
            f"(tensor count {count} does not match content)"
        )

    weights = ModelWeights(config=cfg, tensors=tensors)
    weights.validate()
    return weights


# ---------------------------------------------------------------------------
# Fixture presets
# ---------------------------------------------------------------------------

def zero_weights(cfg: ModelConfig = TINY_CONFIG) -> ModelWeights:
    """All-zero model (bn stats neutral); predicts a flat 0.5 mask."""
    tensors = {}
    for name, shape in expected_shapes(cfg).items():
        tensors[name] = np.zeros(shape, dtype=np.float32)
    _neutralize_bn(tensors)
    return ModelWeights(config=cfg, tensors=tensors)


def random_weights(cfg: ModelConfig = TINY_CONFIG, seed: int = 0) -> ModelWeights:
    """Deterministic random model, scaled ~1/sqrt(fan_in) per tensor."""
    rng = SplitMix64(seed)
    tensors = {}
    for name, shape in sorted(expected_shapes(cfg).items()):
        fan_in = int(np.prod(shape[1:])) if len(shape) > 1 else int(shape[0])
        scale = 1.0 / np.sqrt(max(fan_in, 1))
        flat = np.array([rng.uniform_in(-scale, scale) for _ in range(int(np.prod(shape)))],
                        dtype=np.float32)
        tensors[name] = flat.reshape(shape)
    _neutralize_bn(tensors)
    return ModelWeights(config=cfg, tensors=tensors)


def tiny_weights() -> ModelWeights:
    """The canonical small fixture model used by bench and the demos."""
    return random_weights(TINY_CONFIG, seed=42)


def _neutralize_bn(tensors: dict) -> None:
    for i in range(1, NUM_CONV_LAYERS + 1):
        tensors[f"conv{i}.bn_gamma"] = np.ones_like(tensors[f"conv{i}.bn_gamma"])
        tensors[f"conv{i}.bn_beta"] = np.zeros_like(tensors[f"conv{i}.bn_beta"])
        tensors[f"conv{i}.bn_mean"] = np.zeros_like(tensors[f"conv{i}.bn_mean"])
        tensors[f"conv{i}.bn_var"] = np.ones_like(tensors[f"conv{i}.bn_var"])


def make_preset(kind: str) -> ModelWeights:
    """Parse a preset spec: 'zero', 'tiny', or 'random:<seed>'."""
    if kind == "zero":
        return zero_weights()
    if kind == "tiny":
        return tiny_weights()
    if kind.startswith("random:"):
        try:
            seed = int(kind.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"bad preset {kind!r}: seed must be an integer")
        return random_weights(TINY_CONFIG, seed=seed)
    raise ValueError(f"unknown preset {kind!r}; use zero, tiny, or random:<seed>")
