"""Streaming caches: what a session carries between chunks.

Per encoder layer:
  attn      - inputs to self-attention (post-norm), last `left context` (plus
              per-layer look-ahead, for the regular regime) settled steps.
              Starts empty and grows until it saturates.
  conv      - the last kernel-1 inputs of the causal depthwise convolution,
              zero-filled at session start so the first chunk sees the same
              operands as the left-padded single-pass computation.
  pending   - post-first-FFN values of inputs whose outputs are not yet
              settled (only non-empty for the regular look-ahead regime).

Plus the downsampler mel residual, the RNNT prediction-net hidden states, and
global token/frame offsets.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .container import load_container, save_container
from .errors import StateError

STATE_VERSION = 1


def conv_cache_apply_update(
    cache: np.ndarray, chunk: np.ndarray, kernel: int
) -> tuple[np.ndarray, np.ndarray]:
    """Sliding-window update for a causal conv cache.

    Returns (window, new_cache): the convolution input window cache||chunk and
    the last kernel-1 rows of it, which seed the next step.
    """
    if cache.shape[0] != kernel - 1:
        raise StateError(f"conv cache must hold {kernel - 1} rows, has {cache.shape[0]}")
    window = np.concatenate([cache, chunk], axis=0)
    new_cache = window[window.shape[0] - (kernel - 1) :] if kernel > 1 else window[:0]
    return window, new_cache.copy()


def attn_cache_update(
    cache: np.ndarray, new_keys: np.ndarray, left_context: int | None
) -> np.ndarray:
    """Append new attention inputs, keep at most `left_context` newest rows."""
    merged = np.concatenate([cache, new_keys], axis=0)
    if left_context is None:
        return merged
    if cache.shape[0] > max(left_context, 0):
        raise StateError(f"attn cache wider than bound: {cache.shape[0]} > {left_context}")
    return merged[max(0, merged.shape[0] - left_context) :].copy()


def rnnt_state_save(states: list[np.ndarray]) -> bytes:
    """Serialize prediction-net hidden states; restore is bit-exact."""
    out = [struct.pack("<I", len(states))]
    for h in states:
        h = np.asarray(h, dtype=np.float32)
        out.append(struct.pack("<I", h.shape[0]))
        out.append(h.astype("<f4").tobytes())
    return b"".join(out)


def rnnt_state_restore(blob: bytes, n_layers: int, width: int) -> list[np.ndarray]:
    (count,) = struct.unpack("<I", blob[:4])
    if count != n_layers:
        raise StateError(f"state has {count} layers, decoder expects {n_layers}")
    states = []
    pos = 4
    for _ in range(count):
        (n,) = struct.unpack("<I", blob[pos : pos + 4])
        pos += 4
        if n != width:
            raise StateError(f"state width {n}, decoder expects {width}")
        states.append(np.frombuffer(blob[pos : pos + 4 * n], dtype="<f4").astype(np.float32))
        pos += 4 * n
    return states


@dataclass
class LayerCache:
    attn: np.ndarray  # (w, d) settled attention inputs, w grows to its bound
    conv: np.ndarray  # (kernel-1, d) settled conv inputs
    pending: np.ndarray  # (p, d) post-FFN1 values of not-yet-settled outputs
    n_in: int = 0  # settled inputs seen
    n_out: int = 0  # settled outputs emitted

    @property
    def attn_base(self) -> int:
        """Global position of the first cached attention input."""
        return self.n_in - self.attn.shape[0]

    def float_count(self) -> int:
        return self.attn.size + self.conv.size + self.pending.size


@dataclass
class StreamState:
    layers: list[LayerCache]
    ds_residual: np.ndarray  # (residual_frames, n_mels)
    mel_seen: int = 0
    tokens_in: int = 0  # downsampler tokens produced
    tokens_emitted: int = 0  # encoder tokens settled at the top
    finished: bool = False
    rnnt_states: list[np.ndarray] = field(default_factory=list)

    def float_count(self) -> int:
        n = self.ds_residual.size + sum(lc.float_count() for lc in self.layers)
        return n + sum(h.size for h in self.rnnt_states)

    def attn_widths(self) -> list[int]:
        return [lc.attn.shape[0] for lc in self.layers]

    def conv_widths(self) -> list[int]:
        return [lc.conv.shape[0] for lc in self.layers]

    def save(self, path: str) -> None:
        header = {
            "kind": "stream_state",
            "version": STATE_VERSION,
            "mel_seen": self.mel_seen,
            "tokens_in": self.tokens_in,
            "tokens_emitted": self.tokens_emitted,
            "finished": self.finished,
            "n_layers": len(self.layers),
            "counters": [[lc.n_in, lc.n_out] for lc in self.layers],
            "n_rnnt": len(self.rnnt_states),
        }
        arrays: list[tuple[str, np.ndarray]] = [("ds_residual", self.ds_residual)]
        for i, lc in enumerate(self.layers):
            arrays.append((f"layer{i}.attn", lc.attn))
            arrays.append((f"layer{i}.conv", lc.conv))
            arrays.append((f"layer{i}.pending", lc.pending))
        for i, h in enumerate(self.rnnt_states):
            arrays.append((f"rnnt{i}", h))
        save_container(path, header, arrays)

    @staticmethod
    def load(path: str) -> "StreamState":
        header, tensors = load_container(path)
        if header.get("kind") != "stream_state":
            raise StateError(f"{path} is not a stream state file")
        if header.get("version") != STATE_VERSION:
            raise StateError(f"unsupported state version {header.get('version')}")
        layers = []
        for i in range(header["n_layers"]):
            n_in, n_out = header["counters"][i]
            layers.append(
                LayerCache(
                    attn=tensors[f"layer{i}.attn"],
                    conv=tensors[f"layer{i}.conv"],
                    pending=tensors[f"layer{i}.pending"],
                    n_in=n_in,
                    n_out=n_out,
                )
            )
        return StreamState(
            layers=layers,
            ds_residual=tensors["ds_residual"],
            mel_seen=header["mel_seen"],
            tokens_in=header["tokens_in"],
            tokens_emitted=header["tokens_emitted"],
            finished=header["finished"],
            rnnt_states=[tensors[f"rnnt{i}"] for i in range(header["n_rnnt"])],
        )
