"""Multiply-accumulate accounting for inference runs.

The MAC model is token-level and deliberately coarse:

  attention   - 2 * d_model per unmasked query-key pair (score dot product
                plus value aggregation).
  conv        - d_model * kernel per token per depthwise convolution.
  ffn         - per-token linear layers: the two macaron FFN modules
                (2 * d * d_ffn each), the QKVO projections (4 * d^2) and the
                conv-module pointwise layers (3 * d^2). Each token is counted
                once, at the step where it is first computed; re-projection of
                cached attention inputs is an implementation detail of the
                input-value cache and is not a token recomputation, so it is
                not charged.
  downsampler - stride-2 stage outputs inside the dependency cone of emitted
                tokens, charged once each; the small per-step overlap the
                mel-residual scheme recomputes is not charged.
  decoder     - projection and joint/prediction-net evaluations as executed.

Normalizations and elementwise activations carry no MACs. The duplicate
counter tracks MACs spent on tokens whose outputs are discarded and computed
again later (regular look-ahead speculation, buffered-mode context regions);
for chunked streaming it stays at zero, and per-step totals sum to exactly the
single-pass total.
"""

from __future__ import annotations

from dataclasses import dataclass, field

CATEGORIES = ("attention", "conv", "ffn", "downsampler", "decoder")


@dataclass
class StepMacs:
    attention: int = 0
    conv: int = 0
    ffn: int = 0
    downsampler: int = 0
    decoder: int = 0
    duplicate: int = 0
    speculative_tokens: int = 0

    @property
    def total(self) -> int:
        return self.attention + self.conv + self.ffn + self.downsampler + self.decoder


@dataclass
class ComputeLedger:
    steps: list[StepMacs] = field(default_factory=list)

    def new_step(self) -> StepMacs:
        step = StepMacs()
        self.steps.append(step)
        return step

    @property
    def current(self) -> StepMacs:
        if not self.steps:
            return self.new_step()
        return self.steps[-1]

    def add(self, category: str, macs: int, duplicate: bool = False) -> None:
        step = self.current
        setattr(step, category, getattr(step, category) + int(macs))
        if duplicate:
            step.duplicate += int(macs)

    def add_speculative_tokens(self, n: int) -> None:
        self.current.speculative_tokens += int(n)

    def category_total(self, category: str) -> int:
        return sum(getattr(s, category) for s in self.steps)

    @property
    def duplicate_macs(self) -> int:
        return sum(s.duplicate for s in self.steps)

    @property
    def total(self) -> int:
        return sum(s.total for s in self.steps)

    def to_dict(self) -> dict:
        return {
            **{c: self.category_total(c) for c in CATEGORIES},
            "total": self.total,
            "duplicate": self.duplicate_macs,
            "steps": len(self.steps),
        }
