"""Session engine: audio in, transcripts plus compute and latency accounting out.

Three ways to run the same weights:

  streaming - chunked cache-aware inference (the real thing). For the chunk
              regime the transcript and the encoder outputs equal the
              offline run exactly, and the ledger shows zero duplicate MACs.
  offline   - one forward pass with the same limited-context mask.
  buffered  - the conventional baseline: overlapping windows through an
              unrestricted-mask pass, keeping only each window's central
              chunk. Context regions are recomputed every window, which the
              duplicate counter makes visible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .context import CHUNK, REGULAR, ZERO, AttentionContext
from .decoders import (
    CtcIncrementalDecoder,
    Vocab,
    ctc_logprobs,
    rnnt_greedy_decode,
    rnnt_init_state,
)
from .encoder import (
    EncoderConfig,
    EncoderWeights,
    downsampler_macs_per_token,
    encode_full,
    encode_step,
    init_state,
)
from .errors import ArgumentError, ConfigError, SessionError
from .features import AudioBuffer, FeatureConfig, StreamingFeatureExtractor, log_mel
from .ledger import ComputeLedger
from .metrics import eil
from .model import HybridModel


@dataclass
class TranscriptToken:
    text: str
    token_id: int
    first_frame: int  # encoder frame where the token was decoded
    emit_frame: int  # encoder frame whose audio completes the needed look-ahead


@dataclass
class Transcript:
    decoder: str
    mode: str
    tokens: list[TranscriptToken]
    avg_latency_ms: float | None
    macs: dict

    @property
    def text(self) -> str:
        return "".join(t.text for t in self.tokens)

    def to_json(self) -> str:
        return json.dumps(
            {
                "mode": self.mode,
                "decoder": self.decoder,
                "tokens": [
                    {"text": t.text, "first_frame": t.first_frame, "emit_frame": t.emit_frame}
                    for t in self.tokens
                ],
                "avg_latency_ms": self.avg_latency_ms,
                "macs": self.macs,
                "text": self.text,
            },
            sort_keys=True,
        )


@dataclass
class StreamResult:
    transcripts: dict[str, Transcript]
    ledger: ComputeLedger


@dataclass(frozen=True)
class BufferedConfig:
    chunk_seconds: float = 2.0
    buffer_seconds: float = 4.0

    def __post_init__(self):
        if self.chunk_seconds <= 0:
            raise ConfigError("chunk_seconds must be > 0")
        if self.buffer_seconds < self.chunk_seconds:
            raise ConfigError("buffer must be at least as long as the chunk")


def _emit_frame(ctx: AttentionContext, n_layers: int, frame: int, total: int) -> int:
    if ctx.regime == ZERO:
        return frame
    if ctx.regime == REGULAR:
        return min(frame + ctx.m * n_layers, total - 1)
    start = (frame // ctx.chunk) * ctx.chunk
    return min(start + ctx.chunk - 1, total - 1)


def _decoders_for(choice: str) -> list[str]:
    if choice not in ("ctc", "rnnt", "both"):
        raise ArgumentError(f"decoder must be ctc, rnnt or both, got {choice!r}")
    return ["ctc", "rnnt"] if choice == "both" else [choice]


class StreamingSession:
    """One audio stream: feed samples in any sized pieces, then finish().

    Owns all mutable state (feature remainder, encoder caches, decoder
    states); identical audio fed in different piece sizes produces identical
    transcripts and ledgers because steps are cut from an internal mel buffer
    at a fixed token granularity.
    """

    def __init__(
        self,
        model: HybridModel,
        vocab: Vocab,
        decoder: str = "both",
        feature_cfg: FeatureConfig | None = None,
        step_tokens: int | None = None,
        max_symbols_per_frame: int = 10,
    ):
        if vocab.size != model.cfg.vocab_size:
            raise ConfigError(f"vocab size {vocab.size} != model vocab {model.cfg.vocab_size}")
        self.model = model
        self.vocab = vocab
        self.decoders = _decoders_for(decoder)
        cfg = model.cfg.encoder
        self.feature_cfg = feature_cfg or FeatureConfig(
            n_mels=cfg.n_mels, frame_shift_ms=model.cfg.frame_shift_ms
        )
        if self.feature_cfg.n_mels != cfg.n_mels:
            raise ConfigError("feature n_mels does not match the encoder")
        self._extractor = StreamingFeatureExtractor(self.feature_cfg)
        self._mel = np.zeros((0, cfg.n_mels), dtype=np.float32)
        self.state = init_state(cfg)
        self.ledger = ComputeLedger()
        ctx = cfg.attention
        if step_tokens is None:
            self._step_tokens = ctx.step_tokens(default=1)
        else:
            if step_tokens < 1:
                raise ConfigError("step_tokens must be >= 1")
            if ctx.regime == CHUNK and step_tokens % ctx.chunk != 0:
                raise ConfigError(
                    f"step_tokens {step_tokens} must be a multiple of the chunk "
                    f"size {ctx.chunk}"
                )
            self._step_tokens = step_tokens
        self._max_symbols = max_symbols_per_frame
        self._raw_tokens: dict[str, list[tuple[int, int]]] = {d: [] for d in self.decoders}
        if "ctc" in self.decoders:
            self._ctc_dec = CtcIncrementalDecoder(vocab.blank_id)
        if "rnnt" in self.decoders:
            self.state.rnnt_states = rnnt_init_state(model.rnnt)
        self._finished = False

    def feed(self, samples: np.ndarray) -> None:
        if self._finished:
            raise SessionError("session already finished")
        mel_new = self._extractor.push(np.asarray(samples, dtype=np.int16))
        if mel_new.shape[0]:
            self._mel = np.concatenate([self._mel, mel_new], axis=0)
        step_frames = self._step_tokens * self.model.cfg.encoder.downsampling_rate
        while self._mel.shape[0] >= step_frames:
            self._step(self._mel[:step_frames], final=False)
            self._mel = self._mel[step_frames:]

    def _step(self, frames: np.ndarray, final: bool) -> None:
        self.ledger.new_step()
        offset = self.state.tokens_emitted
        enc_new, _ = encode_step(
            frames, self.state, self.model.encoder, self.model.cfg.encoder,
            rec=self.ledger, final=final,
        )
        if enc_new.shape[0] == 0:
            return
        if "ctc" in self.decoders:
            grid = ctc_logprobs(enc_new, self.model.ctc, self.ledger)
            self._raw_tokens["ctc"] += self._ctc_dec.push(grid, offset)
        if "rnnt" in self.decoders:
            toks, states = rnnt_greedy_decode(
                enc_new, self.model.rnnt, self.state.rnnt_states,
                blank_id=self.vocab.blank_id, max_symbols_per_frame=self._max_symbols,
                frame_offset=offset, rec=self.ledger,
            )
            self.state.rnnt_states = states
            self._raw_tokens["rnnt"] += toks

    def finish(self) -> StreamResult:
        """Process whatever remains (a short final chunk is fine) and assemble."""
        if self._finished:
            raise SessionError("session already finished")
        self._step(self._mel, final=True)
        self._mel = self._mel[:0]
        self._finished = True
        return self._assemble("streaming")

    def _assemble(self, mode: str) -> StreamResult:
        cfg = self.model.cfg
        total = self.state.tokens_emitted
        transcripts = {}
        for name in self.decoders:
            toks = [
                TranscriptToken(
                    text=self.vocab.tokens[k],
                    token_id=k,
                    first_frame=f,
                    emit_frame=_emit_frame(cfg.encoder.attention, cfg.encoder.n_layers, f, total),
                )
                for k, f in self._raw_tokens[name]
            ]
            avg = eil(
                [t.emit_frame for t in toks], [t.first_frame for t in toks],
                cfg.latency_model(),
            )
            transcripts[name] = Transcript(
                decoder=name, mode=mode, tokens=toks,
                avg_latency_ms=avg, macs=self.ledger.to_dict(),
            )
        return StreamResult(transcripts=transcripts, ledger=self.ledger)


def run_streaming(
    audio: AudioBuffer,
    model: HybridModel,
    vocab: Vocab,
    decoder: str = "both",
    feature_cfg: FeatureConfig | None = None,
    step_tokens: int | None = None,
) -> StreamResult:
    session = StreamingSession(
        model, vocab, decoder=decoder, feature_cfg=feature_cfg, step_tokens=step_tokens
    )
    session.feed(audio.samples)
    return session.finish()


def run_offline(
    audio: AudioBuffer,
    model: HybridModel,
    vocab: Vocab,
    decoder: str = "both",
    feature_cfg: FeatureConfig | None = None,
) -> StreamResult:
    """Single-pass inference with the same limited-context mask."""
    cfg = model.cfg.encoder
    feature_cfg = feature_cfg or FeatureConfig(
        n_mels=cfg.n_mels, frame_shift_ms=model.cfg.frame_shift_ms
    )
    mel = log_mel(audio, feature_cfg)
    ledger = ComputeLedger()
    ledger.new_step()
    enc = encode_full(mel, model.encoder, cfg, rec=ledger)
    transcripts = {}
    for name in _decoders_for(decoder):
        if name == "ctc":
            grid = ctc_logprobs(enc, model.ctc, ledger)
            raw = CtcIncrementalDecoder(vocab.blank_id).push(grid)
        else:
            raw, _ = rnnt_greedy_decode(
                enc, model.rnnt, None, blank_id=vocab.blank_id, rec=ledger
            )
        toks = [
            TranscriptToken(vocab.tokens[k], k, f, f) for k, f in raw
        ]
        transcripts[name] = Transcript(
            decoder=name, mode="offline", tokens=toks,
            avg_latency_ms=None, macs=ledger.to_dict(),
        )
    return StreamResult(transcripts=transcripts, ledger=ledger)


def _per_token_ffn_macs(cfg: EncoderConfig) -> tuple[int, int]:
    """(arrival, settle) per-token per-layer linear-layer MACs."""
    d, f = cfg.d_model, cfg.d_ffn
    return 2 * d * f + 2 * d * d, 2 * d * d + 3 * d * d + 2 * d * f


def _central_window_macs(cfg: EncoderConfig, n_window: int, n_central: int) -> int:
    """What the central tokens of a full-context window cost on their own."""
    arr, set_ = _per_token_ffn_macs(cfg)
    d, k = cfg.d_model, cfg.conv_kernel
    per_layer = n_central * (arr + set_ + d * k) + n_central * n_window * 2 * d
    return n_central * downsampler_macs_per_token(cfg) + cfg.n_layers * per_layer


def run_buffered(
    audio: AudioBuffer,
    model: HybridModel,
    vocab: Vocab,
    bcfg: BufferedConfig,
    decoder: str = "both",
    feature_cfg: FeatureConfig | None = None,
) -> StreamResult:
    """Buffered baseline: full-context windows, only central chunks kept.

    CTC keeps the central log-prob rows; the RNNT prediction network is reset
    for every buffer and decodes only the central region, the simplest merge
    for a decoder with state. All window MACs are counted; whatever exceeds
    the cost of the central chunks is recorded as duplicate work.
    """
    cfg = model.cfg.encoder
    feature_cfg = feature_cfg or FeatureConfig(
        n_mels=cfg.n_mels, frame_shift_ms=model.cfg.frame_shift_ms
    )
    lm = model.cfg.latency_model()
    token_s = lm.token_ms / 1000.0
    chunk_tok = max(1, int(round(bcfg.chunk_seconds / token_s)))
    buffer_tok = max(chunk_tok, int(round(bcfg.buffer_seconds / token_s)))
    left = (buffer_tok - chunk_tok) // 2
    right = buffer_tok - chunk_tok - left
    mel = log_mel(audio, feature_cfg)
    dr = cfg.downsampling_rate
    total = mel.n_frames // dr
    ledger = ComputeLedger()
    names = _decoders_for(decoder)
    raw: dict[str, list[tuple[int, int]]] = {n: [] for n in names}
    ctc_dec = CtcIncrementalDecoder(vocab.blank_id) if "ctc" in names else None
    for c0 in range(0, total, chunk_tok):
        c1 = min(c0 + chunk_tok - 1, total - 1)
        b0 = max(0, c0 - left)
        b1 = min(total - 1, c1 + right)
        step = ledger.new_step()
        window = mel.frames[b0 * dr : (b1 + 1) * dr]
        enc = encode_full(window, model.encoder, cfg, rec=ledger, full_context=True)
        step.duplicate += step.total - _central_window_macs(cfg, b1 - b0 + 1, c1 - c0 + 1)
        central = enc[c0 - b0 : c1 - b0 + 1]
        if "ctc" in names:
            grid = ctc_logprobs(central, model.ctc, ledger)
            raw["ctc"] += ctc_dec.push(grid, c0)
        if "rnnt" in names:
            toks, _ = rnnt_greedy_decode(
                central, model.rnnt, None, blank_id=vocab.blank_id,
                frame_offset=c0, rec=ledger,
            )
            raw["rnnt"] += toks
    transcripts = {}
    for name in names:
        toks = []
        for k, f in raw[name]:
            bi = f // chunk_tok
            emit = min(total - 1, bi * chunk_tok + chunk_tok - 1 + right)
            toks.append(TranscriptToken(vocab.tokens[k], k, f, emit))
        avg = eil([t.emit_frame for t in toks], [t.first_frame for t in toks], lm)
        transcripts[name] = Transcript(
            decoder=name, mode="buffered", tokens=toks,
            avg_latency_ms=avg, macs=ledger.to_dict(),
        )
    return StreamResult(transcripts=transcripts, ledger=ledger)


def run_multi_lookahead(
    audio: AudioBuffer,
    model: HybridModel,
    vocab: Vocab,
    chunk_sizes: list[int],
    decoder: str = "both",
    left_chunks: int | None = None,
) -> dict[int, StreamResult]:
    """Evaluate one set of weights under several chunk sizes.

    The relative-position bias table baked into the weights must span the
    largest requested chunk; smaller chunks then come for free, which is what
    lets a single model serve multiple latency targets.
    """
    cfg = model.cfg.encoder
    base = cfg.attention
    lc = left_chunks if left_chunks is not None else (
        base.left_chunks if base.regime == CHUNK else 1
    )
    out = {}
    for c in chunk_sizes:
        ctx = AttentionContext.chunked(c, lc)
        if ctx.past_span() > cfg.bias_past or ctx.future_span() > cfg.bias_future:
            raise ConfigError(
                f"bias table spans ({cfg.bias_past},{cfg.bias_future}) do not cover "
                f"chunk={c}, left_chunks={lc}"
            )
        enc_cfg = cfg.with_attention(ctx)
        model_c = replace(
            model,
            cfg=replace(model.cfg, encoder=enc_cfg),
            encoder=EncoderWeights(enc_cfg, model.encoder.tensors),
        )
        out[c] = run_streaming(audio, model_c, vocab, decoder=decoder)
    return out


def count_macs(
    cfg: EncoderConfig,
    ctx: AttentionContext,
    n_tokens: int,
    mode: str = "offline",
    step_tokens: int | None = None,
) -> ComputeLedger:
    """Closed-form MAC model for an encoder pass over n_tokens.

    mode="offline" integrates the mask intervals directly; mode="streaming"
    walks the same per-step schedule the session engine uses (including
    regular-regime speculation), so engine ledgers must match this to the MAC.
    """
    if mode not in ("offline", "streaming"):
        raise ArgumentError(f"unknown mode {mode!r}")
    cfg = cfg.with_attention(ctx)
    ledger = ComputeLedger()
    if n_tokens == 0:
        return ledger
    arr, set_ = _per_token_ffn_macs(cfg)
    d, k = cfg.d_model, cfg.conv_kernel
    ds_tok = downsampler_macs_per_token(cfg)

    def pairs(pos: int, avail_hi: int) -> int:
        lo, hi = ctx.attend_interval(pos)
        return min(hi, avail_hi) - lo + 1

    if mode == "offline":
        ledger.new_step()
        ledger.add("downsampler", n_tokens * ds_tok)
        att = sum(pairs(t, n_tokens - 1) for t in range(n_tokens))
        for _ in range(cfg.n_layers):
            ledger.add("ffn", n_tokens * (arr + set_))
            ledger.add("conv", n_tokens * d * k)
            ledger.add("attention", att * 2 * d)
        return ledger

    step = ctx.step_tokens(default=step_tokens or 1)
    delay = ctx.settle_delay()
    n_in = [0] * cfg.n_layers
    n_out = [0] * cfg.n_layers
    fed = 0
    while True:
        final = fed + step > n_tokens
        arrive = n_tokens - fed if final else step
        fed += arrive
        ledger.new_step()
        if arrive > 0:
            ledger.add("downsampler", arrive * ds_tok)
        new_x = arrive
        for li in range(cfg.n_layers):
            if new_x > 0:
                ledger.add("ffn", new_x * arr)
            n_in[li] += new_x
            settle_to = n_in[li] if final else max(n_out[li], n_in[li] - delay)
            n_settle = settle_to - n_out[li]
            n_win = n_in[li] - n_out[li]
            if n_win == 0:
                new_x = 0
                continue
            avail = n_in[li] - 1
            settled_rows = range(n_out[li], settle_to)
            spec_rows = range(settle_to, n_in[li])
            ledger.add("ffn", n_settle * set_)
            ledger.add("conv", n_settle * d * k)
            ledger.add("attention", sum(pairs(q, avail) for q in settled_rows) * 2 * d)
            n_spec = len(spec_rows)
            if n_spec:
                ledger.add("ffn", n_spec * set_, duplicate=True)
                ledger.add("conv", n_spec * d * k, duplicate=True)
                ledger.add(
                    "attention", sum(pairs(q, avail) for q in spec_rows) * 2 * d,
                    duplicate=True,
                )
                ledger.add_speculative_tokens(n_spec)
            n_out[li] = settle_to
            new_x = n_settle
        if final:
            break
    return ledger
