"""Machine-vs-human response evaluator.

Each dialog is rendered as a sequence of per-turn fused features (projected
image vector + mean-pooled token embeddings); a small transformer reads the
sequence behind a leading [CLS] slot whose output feeds a sigmoid. Training
labels the gold final turn as human on half of a split's examples and the
model-generated final turn as machine on the other half, so the classes are
balanced by construction. The reported number is adversarial success: the
fraction of held-out machine-generated examples the evaluator labels human.
"""

import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .data import Dataset
from .errors import MalformedRecord, SplitOverlap, TrainingDiverged, Unbalanced
from .featio import CoarseFeatureStore
from .model import EncoderStack, init_parameters


@dataclass(frozen=True)
class AdvConfig:
    vocab_size: int
    d_visual: int
    layers: int = 2
    heads: int = 4
    d_model: int = 256
    ffn_dim: int = 512
    dropout: float = 0.0
    max_turns: int = 32
    steps: int = 300
    batch_size: int = 16
    lr: float = 5e-4


class AdvDiscriminator(nn.Module):
    def __init__(self, cfg: AdvConfig, seed: int = 0):
        super().__init__()
        self.cfg = cfg
        self.tok_emb = nn.Embedding(cfg.vocab_size, cfg.d_model)
        self.vis_proj = nn.Linear(cfg.d_visual, cfg.d_model)
        self.cls = nn.Parameter(torch.zeros(cfg.d_model))
        self.turn_pos_emb = nn.Embedding(cfg.max_turns + 1, cfg.d_model)
        self.encoder = EncoderStack(cfg.layers, cfg.d_model, cfg.heads, cfg.ffn_dim, cfg.dropout)
        self.head = nn.Linear(cfg.d_model, 1)
        init_parameters(self, seed)

    def logits(self, dialogs: list[list[tuple[list[int], np.ndarray]]]) -> torch.Tensor:
        """One logit per dialog; a dialog is a list of (tokens, visual).

        All turns of all dialogs are fused in one padded batch: mean-pooled
        token embeddings plus the projected visual vector.
        """
        dialogs = [d[-self.cfg.max_turns :] for d in dialogs]
        B = len(dialogs)
        T = max(len(d) for d in dialogs) + 1  # leading [CLS]
        flat = [(tokens, visual) for d in dialogs for tokens, visual in d]
        max_tok = max((len(tokens) for tokens, _ in flat), default=1) or 1
        tok_ids = torch.zeros(len(flat), max_tok, dtype=torch.long)
        tok_mask = torch.zeros(len(flat), max_tok, dtype=torch.bool)
        visuals = torch.zeros(len(flat), self.cfg.d_visual)
        for i, (tokens, visual) in enumerate(flat):
            tok_ids[i, : len(tokens)] = torch.tensor(tokens, dtype=torch.long)
            tok_mask[i, : len(tokens)] = True
            visuals[i] = torch.from_numpy(np.ascontiguousarray(visual, dtype=np.float32))
        pooled = (self.tok_emb(tok_ids) * tok_mask[..., None]).sum(dim=1)
        pooled = pooled / tok_mask.sum(dim=1, keepdim=True).clamp(min=1)
        fused = pooled + self.vis_proj(visuals)

        x = torch.zeros(B, T, self.cfg.d_model)
        valid = torch.zeros(B, T, dtype=torch.bool)
        x[:, 0] = self.cls
        valid[:, 0] = True
        cursor = 0
        for i, dialog in enumerate(dialogs):
            n = len(dialog)
            x[i, 1 : n + 1] = fused[cursor : cursor + n]
            valid[i, 1 : n + 1] = True
            cursor += n
        positions = torch.arange(T).clamp(max=self.cfg.max_turns)
        x = x + self.turn_pos_emb(positions)[None, :, :]
        h = self.encoder(x, valid)
        return self.head(h[:, 0])[:, 0]


def _split_examples(dataset: Dataset, episode_ids: set[str]):
    examples = []
    for e, j in dataset.examples():
        if dataset.episodes[e].id in episode_ids:
            examples.append((e, j))
    return examples


def _dialog(dataset: Dataset, store: CoarseFeatureStore, e: int, j: int, final_tokens):
    episode = dataset.episodes[e]
    turns = []
    for turn in episode.turns[:j]:
        turns.append((list(turn.tokens), np.array(store.vector(turn.coarse_idx), dtype=np.float32)))
    final_visual = np.array(store.vector(episode.turns[j].coarse_idx), dtype=np.float32)
    turns.append((list(final_tokens), final_visual))
    return turns


def _labelled_examples(dataset, store, generated, examples, rng):
    """Half gold-final (label 1), half generated-final (label 0)."""
    if len(examples) < 2:
        raise Unbalanced(f"split needs >= 2 examples, got {len(examples)}")
    order = rng.permutation(len(examples))
    half = len(examples) // 2
    labelled = []
    for rank, idx in enumerate(order):
        e, j = examples[int(idx)]
        episode = dataset.episodes[e]
        if rank < half:
            tokens = list(episode.turns[j].tokens)
            label = 1.0
        else:
            key = (episode.id, j)
            if key not in generated:
                raise MalformedRecord(f"no generated response for episode {key[0]}, j={key[1]}")
            tokens = list(generated[key])
            label = 0.0
        labelled.append((_dialog(dataset, store, e, j, tokens), label))
    return labelled


def adversarial_eval(
    dataset: Dataset,
    generated: dict[tuple[str, int], list[int]],
    store: CoarseFeatureStore,
    train_episodes: set[str],
    test_episodes: set[str],
    cfg: AdvConfig,
    seed: int = 0,
) -> float:
    """Train on the train split, return adversarial success on the test split."""
    overlap = set(train_episodes) & set(test_episodes)
    if overlap:
        raise SplitOverlap(f"episodes in both splits: {sorted(overlap)[:5]}")
    rng = np.random.default_rng(seed)
    train = _labelled_examples(dataset, store, generated, _split_examples(dataset, set(train_episodes)), rng)
    test = _labelled_examples(dataset, store, generated, _split_examples(dataset, set(test_episodes)), rng)

    torch.manual_seed(seed)
    disc = AdvDiscriminator(cfg, seed=seed)
    opt = torch.optim.Adam(disc.parameters(), lr=cfg.lr)
    disc.train()
    for step in range(1, cfg.steps + 1):
        picks = rng.choice(len(train), size=min(cfg.batch_size, len(train)), replace=False)
        dialogs = [train[int(i)][0] for i in picks]
        labels = torch.tensor([train[int(i)][1] for i in picks])
        loss = F.binary_cross_entropy_with_logits(disc.logits(dialogs), labels)
        if not math.isfinite(loss.item()):
            raise TrainingDiverged(f"adversarial loss {loss.item()} at step {step}")
        opt.zero_grad()
        loss.backward()
        opt.step()
    disc.eval()

    machine = [d for d, label in test if label == 0.0]
    if not machine:
        raise Unbalanced("test split has no machine-generated examples")
    with torch.no_grad():
        probs = torch.sigmoid(disc.logits(machine))
    return float((probs > 0.5).float().mean())
