"""Model hyperparameter container and the three context-fusion modes."""

from dataclasses import dataclass, replace

from .errors import ConfigError

MODE_NV = "nv"  # text-only context
MODE_CV = "cv"  # pooled image vector added to each token of its turn
MODE_FV = "fv"  # per-object vectors as a prefix ahead of the text
MODES = (MODE_NV, MODE_CV, MODE_FV)


@dataclass(frozen=True)
class ModelConfig:
    mode: str = MODE_NV
    vocab_size: int = 64
    enc_layers: int = 3
    dec_layers: int = 3
    heads: int = 8
    d_model: int = 512
    ffn_dim: int = 2048
    dropout: float = 0.1
    max_src_len: int = 256
    max_turns: int = 16
    max_tgt_len: int = 32
    d_visual: int = 0  # 0 in NV mode; feature-store dim otherwise

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.d_model % self.heads != 0:
            raise ConfigError(f"d_model {self.d_model} not divisible by heads {self.heads}")
        if self.max_src_len < 8:
            raise ConfigError("max_src_len must be >= 8")
        if self.mode != MODE_NV and self.d_visual <= 0:
            raise ConfigError(f"mode {self.mode!r} requires d_visual > 0")
        if self.vocab_size < 8:
            raise ConfigError("vocab_size must cover the 7 specials plus content")

    def with_(self, **kw) -> "ModelConfig":
        return replace(self, **kw)


def tiny_config(mode: str, vocab_size: int, d_visual: int = 0, **kw) -> ModelConfig:
    """The small preset used by verification runs: 2 layers, 2 heads, width 32."""
    base = dict(
        mode=mode,
        vocab_size=vocab_size,
        enc_layers=2,
        dec_layers=2,
        heads=2,
        d_model=32,
        ffn_dim=64,
        dropout=0.0,
        max_src_len=128,
        max_turns=16,
        max_tgt_len=12,
        d_visual=d_visual,
    )
    base.update(kw)
    return ModelConfig(**base)
