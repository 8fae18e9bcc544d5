"""Causal mask-prediction network: conv encoder, LSTM, FC head.

The audio encoder is 15 blocks of (3x3 conv, batch norm, ReLU) over
(time, frequency). The time axis is left-padded only, so an output frame
sees the current and two previous frames per layer and never the future;
the frequency axis uses 'same' padding of 1 with the per-layer stride
from the model config. Kernel time index 0 is the oldest frame.

The flattened conv output (channel-major, then frequency) is concatenated
with the visual embedding for the same 10 ms frame, fed through a
unidirectional LSTM (gate order i, f, g, o), then three FC layers: ReLU
after fc1 and fc2, sigmoid on the fc3 output. All inference math is
float64; weights are upcast once at construction.

Weights are immutable and shareable; a MaskPredictor carries the per-stream
state (conv history + LSTM state) and is single-owner.
"""
from __future__ import annotations

import numpy as np
from scipy.special import expit

from .weights import ModelWeights, NUM_CONV_LAYERS

_KT = 3  # kernel extent along time: frames t-2 .. t


class _ConvLayer:
    def __init__(self, kernel, scale, shift, stride, f_in, f_out):
        out_ch, in_ch = kernel.shape[0], kernel.shape[1]
        self.in_ch = in_ch
        self.out_ch = out_ch
        self.stride = stride
        self.f_in = f_in
        self.f_out = f_out
        # (C_out, C_in*3*3), index order (c_in, kt, kf)
        self.w2 = kernel.reshape(out_ch, in_ch * 9).astype(np.float64)
        self.scale = scale.astype(np.float64)
        self.shift = shift.astype(np.float64)
        self.history = np.zeros((_KT - 1, in_ch, f_in))

    def reset(self):
        self.history[:] = 0.0

    def apply(self, x: np.ndarray) -> np.ndarray:
        """(k, C_in, F_in) -> (k, C_out, F_out), consuming/advancing history."""
        k = x.shape[0]
        xh = np.concatenate([self.history, x], axis=0)
        self.history = xh[-(_KT - 1):].copy()
        xp = np.pad(xh, ((0, 0), (0, 0), (1, 1)))
        span = self.stride * (self.f_out - 1) + 1
        patches = np.empty((k, self.in_ch, _KT, 3, self.f_out))
        for dt in range(_KT):
            for df in range(3):
                patches[:, :, dt, df, :] = xp[dt:dt + k, :, df:df + span:self.stride]
        out = np.matmul(self.w2, patches.reshape(k, self.in_ch * 9, self.f_out))
        out = out * self.scale[None, :, None] + self.shift[None, :, None]
        return np.maximum(out, 0.0)


class ConvStack:
    """The 15-layer causal audio encoder with streaming history."""

    def __init__(self, weights: ModelWeights):
        cfg = weights.config
        chain = cfg.freq_chain
        self.layers = []
        for i in range(1, NUM_CONV_LAYERS + 1):
            gamma = weights[f"conv{i}.bn_gamma"].astype(np.float64)
            var = weights[f"conv{i}.bn_var"].astype(np.float64)
            mean = weights[f"conv{i}.bn_mean"].astype(np.float64)
            beta = weights[f"conv{i}.bn_beta"].astype(np.float64)
            bias = weights[f"conv{i}.bias"].astype(np.float64)
            a = gamma / np.sqrt(var)
            if not np.all(np.isfinite(a)):
                raise ValueError(f"conv{i}: non-finite folded batch-norm scale")
            self.layers.append(_ConvLayer(
                kernel=weights[f"conv{i}.kernel"],
                scale=a,
                shift=a * (bias - mean) + beta,
                stride=cfg.conv_freq_strides[i - 1],
                f_in=chain[i - 1],
                f_out=chain[i],
            ))
        self.embed_dim = cfg.audio_embed_dim

    def reset(self):
        for layer in self.layers:
            layer.reset()

    def step_block(self, frames: np.ndarray) -> np.ndarray:
        """(k, bins) compressed frames -> (k, audio_embed_dim) embeddings."""
        x = frames[:, None, :]  # (k, 1, F)
        for layer in self.layers:
            x = layer.apply(x)
        k = x.shape[0]
        return x.reshape(k, self.embed_dim)


def lstm_step(x: np.ndarray, h: np.ndarray, c: np.ndarray,
              w_ih: np.ndarray, w_hh: np.ndarray,
              b_ih: np.ndarray, b_hh: np.ndarray):
    """One LSTM cell step; gate slices stacked in order (i, f, g, o)."""
    hidden = h.shape[0]
    z = w_ih @ x + b_ih + w_hh @ h + b_hh
    i = expit(z[:hidden])
    f = expit(z[hidden:2 * hidden])
    g = np.tanh(z[2 * hidden:3 * hidden])
    o = expit(z[3 * hidden:])
    c_new = f * c + i * g
    h_new = o * np.tanh(c_new)
    return h_new, c_new


class MaskPredictor:
    """Stateful per-stream mask inference; one mask frame per 10 ms frame."""

    def __init__(self, weights: ModelWeights):
        self.config = weights.config
        self.conv = ConvStack(weights)
        self.w_ih = weights["lstm.W_ih"].astype(np.float64)
        self.w_hh = weights["lstm.W_hh"].astype(np.float64)
        self.b_ih = weights["lstm.b_ih"].astype(np.float64)
        self.b_hh = weights["lstm.b_hh"].astype(np.float64)
        self.fc = [(weights[f"fc{i}.W"].astype(np.float64),
                    weights[f"fc{i}.b"].astype(np.float64)) for i in (1, 2, 3)]
        self.h = np.zeros(self.config.lstm_hidden)
        self.c = np.zeros(self.config.lstm_hidden)

    def reset(self):
        self.conv.reset()
        self.h[:] = 0.0
        self.c[:] = 0.0

    def step(self, compressed_frame: np.ndarray, visual: np.ndarray) -> np.ndarray:
        """Predict one 257-bin mask for a single 10 ms frame."""
        return self.step_block(compressed_frame[None, :], visual[None, :])[0]

    def step_block(self, compressed: np.ndarray, visual: np.ndarray) -> np.ndarray:
        """(k, bins) + (k, visual_dim) -> (k, bins) masks, state carried."""
        compressed = np.asarray(compressed, dtype=np.float64)
        visual = np.asarray(visual, dtype=np.float64)
        if compressed.ndim != 2 or compressed.shape[1] != self.config.bins:
            raise ValueError(f"expected (k, {self.config.bins}) frames, got {compressed.shape}")
        if visual.shape != (compressed.shape[0], self.config.visual_dim):
            raise ValueError(
                f"expected (k, {self.config.visual_dim}) visual embeddings, got {visual.shape}"
            )
        if not (np.all(np.isfinite(compressed)) and np.all(np.isfinite(visual))):
            raise ValueError("non-finite values in network input")

        audio = self.conv.step_block(compressed)
        fused = np.concatenate([audio, visual], axis=1)
        hs = np.empty((fused.shape[0], self.config.lstm_hidden))
        for k in range(fused.shape[0]):
            self.h, self.c = lstm_step(fused[k], self.h, self.c,
                                       self.w_ih, self.w_hh, self.b_ih, self.b_hh)
            hs[k] = self.h

        x = hs
        for w, b in self.fc[:2]:
            x = np.maximum(x @ w.T + b, 0.0)
        w3, b3 = self.fc[2]
        return expit(x @ w3.T + b3)

    def forward_sequence(self, compressed: np.ndarray, visual: np.ndarray,
                         block: int = 128) -> np.ndarray:
        """Whole-sequence inference from a fresh state, in bounded blocks.

        Identical math to feeding step_block chunk by chunk, which is what
        it does, so batch and streaming use literally agree.
        """
        self.reset()
        t = compressed.shape[0]
        if t == 0:
            return np.zeros((0, self.config.bins))
        parts = [self.step_block(compressed[i:i + block], visual[i:i + block])
                 for i in range(0, t, block)]
        return np.concatenate(parts, axis=0)


def audio_encode(weights: ModelWeights, compressed: np.ndarray) -> np.ndarray:
    """Run just the conv encoder over (T, bins) frames from a fresh state."""
    stack = ConvStack(weights)
    return stack.step_block(np.asarray(compressed, dtype=np.float64))
