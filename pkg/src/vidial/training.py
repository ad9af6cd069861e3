"""Adam training with linear warmup and inverse-square-root decay.

Every (episode, j) pair with 1 <= j < n is one example. Example order is a
seed-derived shuffle, reshuffled per epoch, so a (seed, config, dataset)
triple always produces the same loss curve. A NaN/inf loss aborts
immediately; a half-trained model is never returned.
"""

import math
from dataclasses import dataclass, replace

import numpy as np
import torch

from .assembly import assemble, assemble_utterance
from .config import MODE_NV, ModelConfig
from .data import Dataset
from .errors import EmptyDataset, TrainingDiverged
from .model import AssemblyBatch, DialogModel
from .vocab import BOS

DEFAULT_WARMUP_STEPS = 6000


@dataclass(frozen=True)
class OptimConfig:
    peak_lr: float = 3e-4
    warmup_steps: int = DEFAULT_WARMUP_STEPS
    max_steps: int = 2000
    batch_size: int = 16
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    grad_clip: float = 0.0  # max gradient norm; 0 disables clipping
    seed: int = 0

    def with_(self, **kw) -> "OptimConfig":
        return replace(self, **kw)


def learning_rate(step: int, peak_lr: float, warmup_steps: int) -> float:
    """LR at 1-based step: peak*step/warmup, then peak*sqrt(warmup/step)."""
    if step <= warmup_steps:
        return peak_lr * step / warmup_steps
    return peak_lr * math.sqrt(warmup_steps / step)


def _example_stream(n_examples: int, rng: np.random.Generator):
    """Infinite stream of example indices, reshuffled each epoch."""
    while True:
        yield from rng.permutation(n_examples)


def _build_example(dataset: Dataset, ep_idx: int, j: int, cfg, stores, reverse: bool):
    episode = dataset.episodes[ep_idx]
    if reverse:
        assembly = assemble_utterance(episode.turns[j].tokens, cfg)
        target = list(episode.turns[j - 1].tokens)
    else:
        assembly = assemble(episode, j, cfg, *stores)
        target = list(episode.turns[j].tokens)
    return assembly, target[: cfg.max_tgt_len]


def _train(dataset: Dataset, cfg: ModelConfig, optim: OptimConfig, stores, reverse: bool):
    examples = dataset.examples()
    if not examples:
        raise EmptyDataset("no (context, target) pairs to train on")

    torch.manual_seed(optim.seed)  # dropout masks
    model = DialogModel(cfg, seed=optim.seed)
    opt = torch.optim.Adam(
        model.parameters(), lr=optim.peak_lr, betas=(optim.beta1, optim.beta2), eps=optim.eps
    )
    rng = np.random.default_rng(optim.seed)
    stream = _example_stream(len(examples), rng)

    losses: list[float] = []
    model.train()
    for step in range(1, optim.max_steps + 1):
        batch = [examples[next(stream)] for _ in range(optim.batch_size)]
        assemblies, targets = zip(
            *(_build_example(dataset, e, j, cfg, stores, reverse) for e, j in batch)
        )
        loss = model.nll_batch(list(assemblies), list(targets)).mean()
        if not math.isfinite(loss.item()):
            raise TrainingDiverged(f"loss {loss.item()} at step {step}")

        opt.zero_grad()
        loss.backward()
        if optim.grad_clip > 0:
            torch.nn.utils.clip_grad_norm_(model.parameters(), optim.grad_clip)
        for group in opt.param_groups:
            group["lr"] = learning_rate(step, optim.peak_lr, optim.warmup_steps)
        opt.step()
        losses.append(loss.item())
    model.eval()
    return model, losses


def train_forward(
    dataset: Dataset,
    cfg: ModelConfig,
    optim: OptimConfig,
    coarse_store=None,
    object_store=None,
):
    """Train p(x_next | context) in the configured fusion mode."""
    return _train(dataset, cfg, optim, (coarse_store, object_store), reverse=False)


def train_backward(dataset: Dataset, cfg: ModelConfig, optim: OptimConfig):
    """Train the reversed utterance model p(x_prev | x_next), text-only."""
    if cfg.mode != MODE_NV:
        raise ValueError("the reversed model is text-only; use an nv config")
    return _train(dataset, cfg, optim, (None, None), reverse=True)


@torch.no_grad()
def next_token_accuracy(
    model: DialogModel,
    dataset: Dataset,
    coarse_store=None,
    object_store=None,
    examples=None,
) -> float:
    """Teacher-forced argmax accuracy over target token positions.

    Counts only the real target tokens (the closing [EOS] step is excluded)
    so the number is comparable against counting-based predictors.
    """
    model.eval()
    if examples is None:
        examples = dataset.examples()
    correct = 0
    total = 0
    for e, j in examples:
        episode = dataset.episodes[e]
        assembly = assemble(episode, j, model.cfg, coarse_store, object_store)
        target = list(episode.turns[j].tokens)[: model.cfg.max_tgt_len]
        batch = AssemblyBatch([assembly])
        memory = model.encode_batch(batch)
        dec_in = torch.zeros(1, len(target) + 1, dtype=torch.long)
        dec_in[0, 0] = BOS
        dec_in[0, 1:] = torch.tensor(target, dtype=torch.long)
        logits = model.decoder_logits(memory, batch.valid, dec_in)
        pred = logits[0, : len(target)].argmax(dim=-1)
        correct += int((pred == torch.tensor(target)).sum())
        total += len(target)
    return correct / max(total, 1)
