"""Run configuration: UTF-8 lines of ``dotted.key = value``.

``#`` starts a comment, blank lines are ignored, unknown keys are rejected.
Path values are resolved relative to the config file's directory. The
environment variable VIDIAL_SEED overrides the config seed, and an explicit
--seed flag on the command line overrides both.
"""

import os
from dataclasses import dataclass
from pathlib import Path

from .adversarial import AdvConfig
from .config import MODES, ModelConfig
from .errors import ConfigError
from .mi import DiscConfig
from .rerank import DecodeConfig
from .training import OptimConfig


def _bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_PATH = object()

SCHEMA: dict[str, object] = {
    "seed": int,
    "model.mode": str,
    "model.enc_layers": int,
    "model.dec_layers": int,
    "model.heads": int,
    "model.d_model": int,
    "model.ffn_dim": int,
    "model.dropout": float,
    "model.max_src_len": int,
    "model.max_turns": int,
    "model.max_tgt_len": int,
    "model.max_vocab": int,
    "optim.peak_lr": float,
    "optim.warmup_steps": int,
    "optim.max_steps": int,
    "optim.batch_size": int,
    "optim.beta1": float,
    "optim.beta2": float,
    "optim.eps": float,
    "optim.grad_clip": float,
    "decode.beam_size": int,
    "decode.nbest": int,
    "decode.max_tgt_len": int,
    "disc.enc_layers": int,
    "disc.heads": int,
    "disc.d_model": int,
    "disc.ffn_dim": int,
    "disc.hidden": int,
    "disc.negatives": int,
    "disc.share_encoder": _bool,
    "disc.objective": str,
    "adv.layers": int,
    "adv.heads": int,
    "adv.d_model": int,
    "adv.ffn_dim": int,
    "adv.max_turns": int,
    "adv.steps": int,
    "adv.batch_size": int,
    "adv.lr": float,
    "data.episodes": _PATH,
    "data.coarse": _PATH,
    "data.objects": _PATH,
}

DEFAULTS: dict[str, object] = {
    "seed": 0,
    "model.mode": "nv",
    "model.enc_layers": 3,
    "model.dec_layers": 3,
    "model.heads": 8,
    "model.d_model": 512,
    "model.ffn_dim": 2048,
    "model.dropout": 0.1,
    "model.max_src_len": 256,
    "model.max_turns": 16,
    "model.max_tgt_len": 32,
    "model.max_vocab": 32768,
    "optim.peak_lr": 3e-4,
    "optim.warmup_steps": 6000,
    "optim.max_steps": 2000,
    "optim.batch_size": 16,
    "optim.beta1": 0.9,
    "optim.beta2": 0.999,
    "optim.eps": 1e-8,
    "optim.grad_clip": 0.0,
    "decode.beam_size": 8,
    "decode.nbest": 5,
    "decode.max_tgt_len": 0,  # 0: use model.max_tgt_len
    "disc.enc_layers": 2,
    "disc.heads": 2,
    "disc.d_model": 32,
    "disc.ffn_dim": 64,
    "disc.hidden": 512,
    "disc.negatives": 1,
    "disc.share_encoder": False,
    "disc.objective": "bce",
    "adv.layers": 2,
    "adv.heads": 4,
    "adv.d_model": 256,
    "adv.ffn_dim": 512,
    "adv.max_turns": 32,
    "adv.steps": 300,
    "adv.batch_size": 16,
    "adv.lr": 5e-4,
    "data.episodes": None,
    "data.coarse": None,
    "data.objects": None,
}


@dataclass
class RunConfig:
    values: dict

    @classmethod
    def load(cls, path=None) -> "RunConfig":
        values = dict(DEFAULTS)
        if path is not None:
            base = Path(path).resolve().parent
            try:
                text = Path(path).read_text("utf-8")
            except OSError as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from None
            for lineno, line in enumerate(text.splitlines(), 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
                key, raw = (part.strip() for part in line.split("=", 1))
                if key not in SCHEMA:
                    raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
                kind = SCHEMA[key]
                try:
                    if kind is _PATH:
                        values[key] = str((base / raw).resolve())
                    else:
                        values[key] = kind(raw)
                except ValueError as exc:
                    raise ConfigError(f"{path}:{lineno}: {exc}") from None
        if values["model.mode"] not in MODES:
            raise ConfigError(f"model.mode must be one of {MODES}")
        env_seed = os.environ.get("VIDIAL_SEED")
        if env_seed is not None:
            try:
                values["seed"] = int(env_seed)
            except ValueError:
                raise ConfigError(f"VIDIAL_SEED must be an integer, got {env_seed!r}") from None
        return cls(values=values)

    def __getitem__(self, key: str):
        return self.values[key]

    @property
    def seed(self) -> int:
        return int(self.values["seed"])

    def model_config(self, vocab_size: int, d_visual: int = 0, mode: str | None = None) -> ModelConfig:
        return ModelConfig(
            mode=mode or self.values["model.mode"],
            vocab_size=vocab_size,
            enc_layers=self.values["model.enc_layers"],
            dec_layers=self.values["model.dec_layers"],
            heads=self.values["model.heads"],
            d_model=self.values["model.d_model"],
            ffn_dim=self.values["model.ffn_dim"],
            dropout=self.values["model.dropout"],
            max_src_len=self.values["model.max_src_len"],
            max_turns=self.values["model.max_turns"],
            max_tgt_len=self.values["model.max_tgt_len"],
            d_visual=d_visual,
        )

    def optim_config(self, seed: int | None = None) -> OptimConfig:
        return OptimConfig(
            peak_lr=self.values["optim.peak_lr"],
            warmup_steps=self.values["optim.warmup_steps"],
            max_steps=self.values["optim.max_steps"],
            batch_size=self.values["optim.batch_size"],
            beta1=self.values["optim.beta1"],
            beta2=self.values["optim.beta2"],
            eps=self.values["optim.eps"],
            grad_clip=self.values["optim.grad_clip"],
            seed=self.seed if seed is None else seed,
        )

    def decode_config(self) -> DecodeConfig:
        max_tgt = self.values["decode.max_tgt_len"] or None
        return DecodeConfig(
            beam_size=self.values["decode.beam_size"],
            n_best=self.values["decode.nbest"],
            max_tgt_len=max_tgt,
        )

    def disc_config(self, kind: str, vocab_size: int, d_visual: int) -> DiscConfig:
        return DiscConfig(
            kind=kind,
            vocab_size=vocab_size,
            d_visual=d_visual,
            enc_layers=self.values["disc.enc_layers"],
            heads=self.values["disc.heads"],
            d_model=self.values["disc.d_model"],
            ffn_dim=self.values["disc.ffn_dim"],
            hidden=self.values["disc.hidden"],
            max_src_len=self.values["model.max_src_len"],
            negatives=self.values["disc.negatives"],
            share_encoder=self.values["disc.share_encoder"],
        )

    def adv_config(self, vocab_size: int, d_visual: int) -> AdvConfig:
        return AdvConfig(
            vocab_size=vocab_size,
            d_visual=d_visual,
            layers=self.values["adv.layers"],
            heads=self.values["adv.heads"],
            d_model=self.values["adv.d_model"],
            ffn_dim=self.values["adv.ffn_dim"],
            max_turns=self.values["adv.max_turns"],
            steps=self.values["adv.steps"],
            batch_size=self.values["adv.batch_size"],
            lr=self.values["adv.lr"],
        )
