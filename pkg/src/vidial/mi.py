"""Mutual-dependency components: the reversed utterance model and the
visual-match discriminators.

A discriminator encodes an utterance with its own text encoder, glues the
visual vector onto every token feature, and pushes each fused vector
through a two-affine feed-forward head with a sigmoid. Its score for an
(utterance, visual) pair is the mean over tokens of the per-token log
probability, i.e. the log of the geometric mean probability. The "object"
kind is identical except that the object set is dimension-wise mean-pooled
into one vector first.

Training separates matched pairs from mismatched ones via within-batch
negative sampling. The default objective is the bounded cross-entropy form;
the literal difference-of-logs form is available for inspection but is
unbounded below and not recommended for optimization.
"""

import math
from dataclasses import asdict, dataclass, replace

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .assembly import assemble_utterance
from .checkpoint import load_tensors, save_tensors
from .data import Dataset
from .errors import (
    CorruptCheckpoint,
    EmptyDataset,
    EmptyObjectSet,
    EmptyUtterance,
    ModeMismatch,
    NoNegativesAvailable,
    TrainingDiverged,
    VersionMismatch,
)
from .model import AssemblyBatch, DialogModel, EncoderStack, init_parameters
from .training import OptimConfig, learning_rate
from .vocab import BOS, Vocabulary, from_words

KIND_COARSE = "coarse"
KIND_OBJECT = "object"

# sigmoid outputs are clamped away from {0, 1} so logs stay finite
PROB_EPS = 1e-6


@dataclass(frozen=True)
class DiscConfig:
    kind: str
    vocab_size: int
    d_visual: int
    enc_layers: int = 2
    heads: int = 2
    d_model: int = 32
    ffn_dim: int = 64
    hidden: int = 512
    max_src_len: int = 128
    dropout: float = 0.0
    negatives: int = 1
    share_encoder: bool = False

    def with_(self, **kw) -> "DiscConfig":
        return replace(self, **kw)


class MiDiscriminator(nn.Module):
    """Token-level matcher between an utterance and a visual vector."""

    def __init__(self, cfg: DiscConfig, seed: int = 0):
        super().__init__()
        if cfg.kind not in (KIND_COARSE, KIND_OBJECT):
            raise ValueError(f"unknown discriminator kind {cfg.kind!r}")
        self.cfg = cfg
        self.tok_emb = nn.Embedding(cfg.vocab_size, cfg.d_model)
        self.pos_emb = nn.Embedding(cfg.max_src_len, cfg.d_model)
        self.encoder = EncoderStack(cfg.enc_layers, cfg.d_model, cfg.heads, cfg.ffn_dim, cfg.dropout)
        self.fuse_up = nn.Linear(cfg.d_model + cfg.d_visual, cfg.hidden)
        self.fuse_out = nn.Linear(cfg.hidden, 1)
        init_parameters(self, seed)

    def adopt_encoder(self, forward_model: DialogModel) -> None:
        """Copy (and freeze) the forward model's token/position/encoder
        weights; the fusion head stays trainable. The forward model itself
        is never touched by discriminator training."""
        with torch.no_grad():
            self.tok_emb.weight.copy_(forward_model.tok_emb.weight)
            self.pos_emb.weight.copy_(
                forward_model.src_pos_emb.weight[: self.pos_emb.weight.shape[0]]
            )
        self.encoder.load_state_dict(forward_model.encoder.state_dict())
        for module in (self.tok_emb, self.pos_emb, self.encoder):
            for p in module.parameters():
                p.requires_grad_(False)

    def token_features(self, utterances: list[list[int]]):
        """Encode a padded batch of bare utterances: ([B,L,D], mask [B,L])."""
        B = len(utterances)
        L = max(len(u) for u in utterances)
        ids = torch.zeros(B, L, dtype=torch.long)
        mask = torch.zeros(B, L, dtype=torch.bool)
        for i, u in enumerate(utterances):
            ids[i, : len(u)] = torch.tensor(u, dtype=torch.long)
            mask[i, : len(u)] = True
        x = self.tok_emb(ids) + self.pos_emb(torch.arange(L))[None, :, :]
        return self.encoder(x, mask), mask

    def score_batch(self, utterances: list[list[int]], visuals: torch.Tensor) -> torch.Tensor:
        """Per-pair mean token log-likelihood: [B], every entry <= 0."""
        for u in utterances:
            if len(u) == 0:
                raise EmptyUtterance("cannot score an empty utterance")
            if len(u) > self.cfg.max_src_len:
                raise ValueError(f"utterance length {len(u)} exceeds {self.cfg.max_src_len}")
        feats, mask = self.token_features(utterances)
        B, L, _ = feats.shape
        fused = torch.cat([feats, visuals[:, None, :].expand(B, L, -1)], dim=-1)
        logits = self.fuse_out(F.relu(self.fuse_up(fused)))[..., 0]
        probs = torch.sigmoid(logits).clamp(PROB_EPS, 1.0 - PROB_EPS)
        token_log = torch.log(probs).masked_fill(~mask, 0.0)
        return token_log.sum(dim=1) / mask.sum(dim=1)


def mean_pool_objects(objects) -> np.ndarray:
    """Dimension-wise arithmetic mean of an m x d object matrix."""
    arr = np.asarray(objects, dtype=np.float32)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise EmptyObjectSet("mean pooling needs at least one object vector")
    return arr.mean(axis=0)


def _as_visual(disc: MiDiscriminator, visual) -> torch.Tensor:
    vec = torch.from_numpy(np.array(visual, dtype=np.float32))
    if vec.ndim != 1 or vec.shape[0] != disc.cfg.d_visual:
        raise ModeMismatch(
            f"expected a {disc.cfg.d_visual}-dim vector for kind {disc.cfg.kind!r}, "
            f"got shape {tuple(vec.shape)}"
        )
    return vec


def q_score(disc: MiDiscriminator, utterance_ids, visual) -> float:
    """Mean token-level log-likelihood that the utterance matches ``visual``."""
    vec = _as_visual(disc, visual)
    with torch.no_grad():
        return float(disc.score_batch([list(utterance_ids)], vec[None, :])[0])


def q2_score(disc: MiDiscriminator, utterance_ids, objects) -> float:
    """Object-set variant: mean-pool the set, then score as q_score."""
    if disc.cfg.kind != KIND_OBJECT:
        raise ModeMismatch("q2_score needs an object-kind discriminator")
    return q_score(disc, utterance_ids, mean_pool_objects(objects))


def sample_negatives(rng: np.random.Generator, batch_indices, positive_index: int, k: int = 1):
    """k distinct image indices drawn uniformly from the batch, never the
    positive one."""
    candidates = sorted(set(batch_indices) - {positive_index})
    if len(candidates) < k:
        raise NoNegativesAvailable(
            f"need {k} negatives, batch offers {len(candidates)} distinct non-positive indices"
        )
    picked = rng.choice(len(candidates), size=k, replace=False)
    return [candidates[int(i)] for i in picked]


def disc_loss(
    disc: MiDiscriminator,
    positives: list[tuple[list[int], np.ndarray]],
    negatives: list[list[np.ndarray]],
    objective: str = "bce",
) -> torch.Tensor:
    """Contrastive loss over (positive pair, sampled negative visuals).

    bce: mean over (pos, neg) pairs of -[log p_pos + log(1 - p_neg)] where p
    is the per-token-averaged (geometric mean) probability. paper_literal:
    mean over positives of -[log p_pos - sum_l log p_neg_l]; unbounded below.
    """
    if len(positives) == 0 or any(len(n) == 0 for n in negatives):
        raise NoNegativesAvailable("every positive needs at least one negative")
    utterances, pos_vecs, neg_vecs, owner = [], [], [], []
    for i, ((ids, vec), negs) in enumerate(zip(positives, negatives, strict=True)):
        utterances.append(list(ids))
        pos_vecs.append(np.asarray(vec, dtype=np.float32))
        for nv in negs:
            neg_vecs.append(np.asarray(nv, dtype=np.float32))
            owner.append(i)

    pos_scores = disc.score_batch(utterances, torch.as_tensor(np.stack(pos_vecs)))
    neg_utts = [utterances[i] for i in owner]
    neg_scores = disc.score_batch(neg_utts, torch.as_tensor(np.stack(neg_vecs)))

    if objective == "paper_literal":
        neg_sum = torch.zeros(len(positives))
        neg_sum.index_add_(0, torch.tensor(owner), neg_scores)
        return -(pos_scores - neg_sum).mean()
    if objective != "bce":
        raise ValueError(f"unknown objective {objective!r}")
    pos_term = pos_scores[torch.tensor(owner)]
    neg_prob = torch.exp(neg_scores).clamp(max=1.0 - PROB_EPS)
    return -(pos_term + torch.log1p(-neg_prob)).mean()


def _positive_items(dataset: Dataset, kind: str):
    """(utterance tokens, image index) for every target turn."""
    items = []
    for e, j in dataset.examples():
        turn = dataset.episodes[e].turns[j]
        idx = turn.coarse_idx if kind == KIND_COARSE else turn.object_idx
        items.append((list(turn.tokens), idx))
    return items


def visual_vector(kind: str, store, index: int) -> np.ndarray:
    if kind == KIND_COARSE:
        return np.asarray(store.vector(index), dtype=np.float32)
    return mean_pool_objects(store.objects(index))


def train_discriminator(
    dataset: Dataset,
    cfg: DiscConfig,
    optim: OptimConfig,
    store,
    objective: str = "bce",
    forward_model: DialogModel | None = None,
):
    """Train a MiDiscriminator on matched vs within-batch-mismatched pairs."""
    items = _positive_items(dataset, cfg.kind)
    if not items:
        raise EmptyDataset("no (utterance, image) pairs to train on")
    if cfg.share_encoder and forward_model is None:
        raise ValueError("share_encoder=True needs the forward model")

    torch.manual_seed(optim.seed)
    disc = MiDiscriminator(cfg, seed=optim.seed)
    if cfg.share_encoder:
        disc.adopt_encoder(forward_model)
    trainable = [p for p in disc.parameters() if p.requires_grad]
    opt = torch.optim.Adam(
        trainable, lr=optim.peak_lr, betas=(optim.beta1, optim.beta2), eps=optim.eps
    )
    rng = np.random.default_rng(optim.seed)

    losses: list[float] = []
    disc.train()
    for step in range(1, optim.max_steps + 1):
        batch = [items[int(i)] for i in rng.choice(len(items), size=optim.batch_size)]
        batch_indices = [idx for _, idx in batch]
        positives, negatives = [], []
        for ids, idx in batch:
            try:
                neg_idx = sample_negatives(rng, batch_indices, idx, cfg.negatives)
            except NoNegativesAvailable:
                continue
            positives.append((ids, visual_vector(cfg.kind, store, idx)))
            negatives.append([visual_vector(cfg.kind, store, n) for n in neg_idx])
        if not positives:
            raise NoNegativesAvailable("batch contains a single distinct image")
        loss = disc_loss(disc, positives, negatives, objective=objective)
        if not math.isfinite(loss.item()):
            raise TrainingDiverged(f"discriminator loss {loss.item()} at step {step}")
        opt.zero_grad()
        loss.backward()
        for group in opt.param_groups:
            group["lr"] = learning_rate(step, optim.peak_lr, optim.warmup_steps)
        opt.step()
        losses.append(loss.item())
    disc.eval()
    return disc, losses


def pair_accuracy(disc: MiDiscriminator, pairs) -> float:
    """Fraction of (utterance, matched vec, mismatched vec) triples where
    the matched pair outscores the mismatched one."""
    correct = 0
    for ids, pos_vec, neg_vec in pairs:
        if q_score(disc, ids, pos_vec) > q_score(disc, ids, neg_vec):
            correct += 1
    return correct / max(len(pairs), 1)


# --- reversed utterance model ----------------------------------------------


def backward_score(bm: DialogModel, x_next_ids, x_prev_ids) -> float:
    """Sum of token log-probabilities of ``x_prev`` given ``x_next`` under
    the reversed model; unnormalized by length, no [EOS] term."""
    x_next = list(x_next_ids)
    x_prev = list(x_prev_ids)
    if not x_next or not x_prev:
        raise EmptyUtterance("backward scoring needs non-empty utterances")
    x_prev = x_prev[: bm.cfg.max_tgt_len]
    assembly = assemble_utterance(x_next, bm.cfg)
    with torch.no_grad():
        batch = AssemblyBatch([assembly])
        memory = bm.encode_batch(batch)
        dec_in = torch.zeros(1, len(x_prev) + 1, dtype=torch.long)
        dec_in[0, 0] = BOS
        dec_in[0, 1:] = torch.tensor(x_prev, dtype=torch.long)
        logits = bm.decoder_logits(memory, batch.valid, dec_in)
        logprobs = F.log_softmax(logits[0, : len(x_prev)], dim=-1)
        gold = torch.tensor(x_prev, dtype=torch.long)
        return float(logprobs.gather(-1, gold[:, None])[:, 0].sum())


# --- persistence -------------------------------------------------------------


def save_discriminator(disc: MiDiscriminator, path, vocabulary: Vocabulary) -> None:
    config = {"disc": asdict(disc.cfg), "vocab_words": list(vocabulary.words)}
    save_tensors(path, "discriminator", config, dict(disc.state_dict()))


def load_discriminator(path):
    config, tensors = load_tensors(path)
    if config.get("component") != "discriminator":
        raise VersionMismatch(f"{path}: component {config.get('component')!r}")
    try:
        cfg = DiscConfig(**config["disc"])
        vocabulary = from_words(config["vocab_words"])
    except (KeyError, TypeError) as exc:
        raise CorruptCheckpoint(f"{path}: config missing fields: {exc}") from None
    disc = MiDiscriminator(cfg, seed=0)
    try:
        disc.load_state_dict(tensors)
    except RuntimeError as exc:
        raise CorruptCheckpoint(f"{path}: parameter shapes disagree: {exc}") from None
    disc.eval()
    return disc, cfg, vocabulary
