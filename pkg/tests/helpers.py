"""Independent oracles and fixtures shared across the test suite.

Everything here is deliberately naive: triple loops, exhaustive path
enumeration, rational arithmetic. Oracles never call the code they check.
"""

from __future__ import annotations

import itertools
import math
import struct
from fractions import Fraction

import numpy as np

from streamasr import (
    AttentionContext,
    AudioBuffer,
    EncoderConfig,
    HeadConfig,
    ModelConfig,
    Vocab,
    init_model,
)


def matmul_triple_loop(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a64 = a.astype(np.float64)
    b64 = b.astype(np.float64)
    out = np.zeros((a.shape[0], b.shape[1]), dtype=np.float64)
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            s = 0.0
            for k in range(a.shape[1]):
                s += a64[i, k] * b64[k, j]
            out[i, j] = s
    return out.astype(np.float32)


def softmax_rational(scores: list[float], mask: list[bool], terms: int = 40) -> list[float]:
    """Softmax via rational-arithmetic exp series on the max-shifted scores."""
    m = max(s for s, keep in zip(scores, mask) if keep)

    def exp_frac(x: Fraction) -> Fraction:
        total = Fraction(1)
        term = Fraction(1)
        for n in range(1, terms):
            term *= x / n
            total += term
        return total

    exps = []
    for s, keep in zip(scores, mask):
        if keep:
            exps.append(exp_frac(Fraction(s - m).limit_denominator(10**12)))
        else:
            exps.append(Fraction(0))
    denom = sum(exps)
    return [float(e / denom) for e in exps]


def dft_power_oracle(window: np.ndarray) -> np.ndarray:
    """Direct per-bin DFT magnitude squared."""
    n = len(window)
    out = np.zeros(n // 2 + 1)
    for b in range(n // 2 + 1):
        re = sum(window[k] * math.cos(-2 * math.pi * k * b / n) for k in range(n))
        im = sum(window[k] * math.sin(-2 * math.pi * k * b / n) for k in range(n))
        out[b] = re * re + im * im
    return out


def ctc_loss_enumeration(grid: np.ndarray, target: list[int], blank: int = 0) -> float:
    """Sum path probabilities over all V^T frame label sequences that collapse
    to the target."""
    t_len, v = grid.shape
    probs = np.exp(grid)
    total = 0.0
    for path in itertools.product(range(v), repeat=t_len):
        collapsed = []
        prev = None
        for p in path:
            if p != prev:
                if p != blank:
                    collapsed.append(p)
            prev = p
        if collapsed == list(target):
            pr = 1.0
            for t, p in enumerate(path):
                pr *= probs[t, p]
            total += pr
    return float("inf") if total == 0.0 else -math.log(total)


def rnnt_loss_enumeration(lp: np.ndarray, target: list[int], blank: int = 0) -> float:
    """Sum over all monotonic emit/advance paths through the (T, U+1) lattice."""
    t_len, u_len, _ = lp.shape
    u_total = u_len - 1
    probs = np.exp(lp)
    total = 0.0

    def walk(t: int, u: int, p: float) -> None:
        nonlocal total
        if t == t_len - 1 and u == u_total:
            total += p * probs[t, u, blank]
        if u < u_total:
            walk(t, u + 1, p * probs[t, u, target[u]])
        if t < t_len - 1:
            walk(t + 1, u, p * probs[t, u, blank])

    walk(0, 0, 1.0)
    return float("inf") if total == 0.0 else -math.log(total)


def rnnt_path_count(t_len: int, u_len: int) -> int:
    return math.comb(t_len + u_len - 1, u_len)


def wer_enumeration(ref: list[str], hyp: list[str]):
    """Exhaustive alignment search minimizing (cost, -S, -D)."""
    best = [None]

    def walk(i: int, j: int, s: int, d: int, ins: int) -> None:
        if i == len(ref) and j == len(hyp):
            key = (s + d + ins, -s, -d)
            if best[0] is None or key < best[0]:
                best[0] = key
            return
        if i < len(ref) and j < len(hyp):
            walk(i + 1, j + 1, s + (ref[i] != hyp[j]), d, ins)
        if i < len(ref):
            walk(i + 1, j, s, d + 1, ins)
        if j < len(hyp):
            walk(i, j + 1, s, d, ins + 1)

    walk(0, 0, 0, 0, 0)
    cost, neg_s, neg_d = best[0]
    return -neg_s, -neg_d, cost - (-neg_s) - (-neg_d)


def write_wav(path: str, samples: np.ndarray, sample_rate: int = 16000,
              channels: int = 1, bits: int = 16, audio_format: int = 1) -> None:
    samples = np.asarray(samples, dtype=np.int16)
    data = samples.astype("<i2").tobytes()
    byte_rate = sample_rate * channels * bits // 8
    block_align = channels * bits // 8
    with open(path, "wb") as f:
        f.write(b"RIFF")
        f.write(struct.pack("<I", 36 + len(data)))
        f.write(b"WAVE")
        f.write(b"fmt ")
        f.write(struct.pack("<IHHIIHH", 16, audio_format, channels, sample_rate,
                            byte_rate, block_align, bits))
        f.write(b"data")
        f.write(struct.pack("<I", len(data)))
        f.write(data)


def synth_audio(seconds: float, seed: int, sample_rate: int = 16000) -> AudioBuffer:
    """Deterministic tone mixture with a little noise, int16."""
    rng = np.random.default_rng(seed)
    n = int(seconds * sample_rate)
    t = np.arange(n) / sample_rate
    x = np.zeros(n)
    for _ in range(3):
        f = rng.uniform(80.0, 3500.0)
        x += rng.uniform(0.1, 0.4) * np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
    x += 0.02 * rng.standard_normal(n)
    return AudioBuffer(sample_rate, (np.clip(x, -1, 1) * 12000).astype(np.int16))


def random_mel(n_frames: int, n_mels: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).standard_normal((n_frames, n_mels)).astype(np.float32)


def tiny_encoder_config(
    ctx: AttentionContext | None = None,
    n_layers: int = 2,
    d_model: int = 16,
    n_heads: int = 2,
    conv_kernel: int = 3,
    downsampling_rate: int = 4,
    n_mels: int = 8,
    **kw,
) -> EncoderConfig:
    return EncoderConfig(
        n_layers=n_layers,
        d_model=d_model,
        n_heads=n_heads,
        conv_kernel=conv_kernel,
        downsampling_rate=downsampling_rate,
        attention=ctx or AttentionContext.chunked(3, 1),
        n_mels=n_mels,
        **kw,
    )


def tiny_model(ctx: AttentionContext | None = None, seed: int = 11, vocab: Vocab | None = None,
               **enc_kw):
    vocab = vocab or Vocab.chars("abc ")
    cfg = ModelConfig(
        encoder=tiny_encoder_config(ctx, n_mels=enc_kw.pop("n_mels", 80), **enc_kw),
        vocab_size=vocab.size,
        d_pred=12,
        d_joint=12,
    )
    return init_model(cfg, seed), vocab


def random_head(seed: int = 3, d_model: int = 16, vocab_size: int = 5,
                d_pred: int = 8, d_joint: int = 8, pred_layers: int = 1):
    from streamasr.decoders import init_ctc_head, init_rnnt_head
    from streamasr.numerics import Rng

    hc = HeadConfig(d_model=d_model, vocab_size=vocab_size, d_pred=d_pred,
                    pred_layers=pred_layers, d_joint=d_joint)
    rng = Rng(seed)
    return init_ctc_head(hc, rng), init_rnnt_head(hc, rng)
