"""Weighted interpolation of forward, backward and visual-match scores
over an N-best list, plus whole-split generation.

The combined score of a hypothesis x with context turn x_prev and upcoming
visual v is::

    w_f * forward_logprob(x) + w_b * backward_score(x_prev | x)
                             + w_v * match_score(x, v)

The three weights are nonnegative and sum to one. Zero-weight terms are
skipped entirely, so weights (1, 0, 0) reproduce the forward top-1 bit for
bit and never evaluate the other models. Scale differences between the
terms (a summed log-probability vs a per-token-averaged one) are inherited
from their definitions; the weights absorb scale.
"""

import json
from dataclasses import dataclass

import numpy as np

from .assembly import assemble
from .beam import Hypothesis, beam_nbest
from .config import MODE_CV, MODE_FV
from .data import Dataset
from .errors import ConfigError, EmptyNBest, MalformedRecord, ModeMismatch
from .featio import CoarseFeatureStore, ObjectFeatureStore
from .mi import KIND_COARSE, KIND_OBJECT, MiDiscriminator, backward_score, mean_pool_objects, q_score
from .model import DialogModel

WEIGHT_TOLERANCE = 1e-9


@dataclass(frozen=True)
class RerankWeights:
    forward: float
    backward: float
    visual: float

    def __post_init__(self):
        if min(self.forward, self.backward, self.visual) < 0:
            raise ConfigError("rerank weights must be nonnegative")
        total = self.forward + self.backward + self.visual
        if abs(total - 1.0) > WEIGHT_TOLERANCE:
            raise ConfigError(f"rerank weights must sum to 1, got {total!r}")

    @property
    def forward_only(self) -> bool:
        return self.backward == 0.0 and self.visual == 0.0


def _check_visual(mode: str, disc: MiDiscriminator, visual):
    arr = np.asarray(visual, dtype=np.float32)
    if mode == MODE_CV:
        if arr.ndim != 1:
            raise ModeMismatch(f"cv reranking expects a coarse vector, got shape {arr.shape}")
        if disc.cfg.kind != KIND_COARSE:
            raise ModeMismatch("cv reranking needs a coarse-kind discriminator")
        return arr
    if mode == MODE_FV:
        if arr.ndim != 2:
            raise ModeMismatch(f"fv reranking expects an object matrix, got shape {arr.shape}")
        if disc.cfg.kind != KIND_OBJECT:
            raise ModeMismatch("fv reranking needs an object-kind discriminator")
        return mean_pool_objects(arr)
    raise ModeMismatch(f"reranking mode must be cv or fv, got {mode!r}")


def mi_scores(
    nbest: list[Hypothesis],
    weights: RerankWeights,
    bm: DialogModel,
    disc: MiDiscriminator,
    visual,
    x_prev_ids,
    mode: str,
) -> list[float]:
    """Combined interpolated score per hypothesis, in nbest order."""
    if not nbest:
        raise EmptyNBest("cannot rerank an empty list")
    vec = _check_visual(mode, disc, visual) if weights.visual > 0 else None
    scores = []
    for hyp in nbest:
        total = weights.forward * hyp.forward_logprob
        content = list(hyp.content)
        if weights.backward > 0:
            total += (
                weights.backward * backward_score(bm, content, x_prev_ids)
                if content
                else float("-inf")
            )
        if weights.visual > 0:
            total += weights.visual * q_score(disc, content, vec) if content else float("-inf")
        scores.append(total)
    return scores


def rerank(
    nbest: list[Hypothesis],
    weights: RerankWeights,
    bm: DialogModel,
    disc: MiDiscriminator,
    visual,
    x_prev_ids,
    mode: str,
) -> Hypothesis:
    """Argmax of the combined score; ties keep the earlier N-best rank."""
    if not nbest:
        raise EmptyNBest("cannot rerank an empty list")
    if weights.forward_only:
        return nbest[0]
    scores = mi_scores(nbest, weights, bm, disc, visual, x_prev_ids, mode)
    best = 0
    for i, s in enumerate(scores):
        if s > scores[best]:
            best = i
    return nbest[best]


@dataclass(frozen=True)
class DecodeConfig:
    beam_size: int = 8
    n_best: int = 5
    max_tgt_len: int | None = None


@dataclass(frozen=True)
class MiConfig:
    backward_model: DialogModel
    disc: MiDiscriminator
    weights: RerankWeights


def generate_split(
    model: DialogModel,
    dataset: Dataset,
    decode_cfg: DecodeConfig,
    coarse_store: CoarseFeatureStore | None = None,
    object_store: ObjectFeatureStore | None = None,
    mi: MiConfig | None = None,
) -> list[dict]:
    """One response record per (episode, j) pair, in canonical order.

    With no MI config, or with forward-only weights, the record carries the
    forward top-1 and a null rerank score; the output bytes are identical
    either way.
    """
    if len(dataset.vocab) != model.cfg.vocab_size:
        raise ModeMismatch(
            f"dataset vocabulary size {len(dataset.vocab)} != model vocab {model.cfg.vocab_size}"
        )
    rerank_mode = None
    if mi is not None and not mi.weights.forward_only:
        rerank_mode = MODE_CV if mi.disc.cfg.kind == KIND_COARSE else MODE_FV
        if rerank_mode == MODE_CV and coarse_store is None:
            raise ModeMismatch("coarse-kind reranking needs a coarse feature store")
        if rerank_mode == MODE_FV and object_store is None:
            raise ModeMismatch("object-kind reranking needs an object feature store")

    records = []
    for e, j in dataset.examples():
        episode = dataset.episodes[e]
        assembly = assemble(episode, j, model.cfg, coarse_store, object_store)
        nbest = beam_nbest(
            model, assembly, decode_cfg.beam_size, decode_cfg.n_best, decode_cfg.max_tgt_len
        )
        if rerank_mode is None:
            selected, score = nbest[0], None
        else:
            target_turn = episode.turns[j]
            if rerank_mode == MODE_CV:
                visual = coarse_store.vector(target_turn.coarse_idx)
            else:
                visual = object_store.objects(target_turn.object_idx)
            scores = mi_scores(
                nbest,
                mi.weights,
                mi.backward_model,
                mi.disc,
                visual,
                list(episode.turns[j - 1].tokens),
                rerank_mode,
            )
            best = max(range(len(scores)), key=lambda i: (scores[i], -i))
            selected, score = nbest[best], scores[best]
        records.append(
            {
                "episode": episode.id,
                "j": j,
                "hypothesis": dataset.vocab.decode(selected.ids),
                "reference": dataset.vocab.decode(episode.turns[j].tokens),
                "forward_logprob": selected.forward_logprob,
                "rerank_score": score,
            }
        )
    return records


def write_responses(records: list[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec, ensure_ascii=False) + "\n")


def read_responses(path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(f"line {lineno}: {exc}") from None
            if not isinstance(rec, dict) or "hypothesis" not in rec or "reference" not in rec:
                raise MalformedRecord(f"line {lineno}: missing hypothesis/reference")
            records.append(rec)
    if not records:
        raise MalformedRecord(f"{path}: no records")
    return records
