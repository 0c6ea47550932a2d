"""Cache-aware streaming ASR: a limited-context encoder whose chunked
inference reproduces its single-pass output exactly, with CTC/RNNT decoding,
alignment losses, and compute/latency accounting."""

from .cache import (
    LayerCache,
    StreamState,
    attn_cache_update,
    conv_cache_apply_update,
    rnnt_state_restore,
    rnnt_state_save,
)
from .context import (
    AttentionContext,
    LatencyBounds,
    LatencyModel,
    build_mask,
    effective_lookahead,
    feasible_regular_latencies,
    latency_ms,
    receptive_field_frames,
    receptive_field_tokens,
)
from .decoders import (
    CtcHead,
    CtcIncrementalDecoder,
    HeadConfig,
    RnntHead,
    Vocab,
    ctc_greedy_decode,
    ctc_logprobs,
    rnnt_greedy_decode,
    rnnt_init_state,
    rnnt_joint_log_probs,
)
from .encoder import (
    EncoderConfig,
    EncoderWeights,
    downsample_segment,
    encode_full,
    encode_step,
    init_encoder_weights,
    init_state,
)
from .features import (
    AudioBuffer,
    FeatureConfig,
    MelFrames,
    StreamingFeatureExtractor,
    dump_features,
    load_features,
    log_mel,
    read_wav,
)
from .ledger import ComputeLedger, StepMacs
from .losses import ctc_loss, hybrid_loss, rnnt_loss, rnnt_loss_fastemit
from .metrics import WerBreakdown, eil, wer
from .model import HybridModel, ModelConfig, init_model, load_model, save_model
from .numerics import (
    Rng,
    depthwise_conv1d_causal,
    layer_norm,
    masked_softmax,
    matmul,
)
from .streaming import (
    BufferedConfig,
    StreamingSession,
    StreamResult,
    Transcript,
    TranscriptToken,
    count_macs,
    run_buffered,
    run_multi_lookahead,
    run_offline,
    run_streaming,
)

__all__ = [name for name in dir() if not name.startswith("_")]
