"""Beam-search N-best decoding.

Hypotheses grow over the non-special vocabulary plus [EOS]; a hypothesis
terminates when it emits [EOS] or reaches the step cap, so its id sequence
is at most ``max_tgt_len`` long including any trailing [EOS]. Scores are
raw sums of token log-probabilities; no length normalization anywhere.
All ties (within the beam and in the final ranking) break toward the
lexicographically smaller id sequence, which makes decoding deterministic.
"""

from dataclasses import dataclass

import torch

from .assembly import ContextAssembly
from .model import AssemblyBatch, DialogModel
from .vocab import EOS, NUM_SPECIALS


@dataclass(frozen=True)
class Hypothesis:
    ids: tuple[int, ...]  # no [BOS]; [EOS] kept when it terminated decoding
    forward_logprob: float

    @property
    def content(self) -> tuple[int, ...]:
        """Token ids without the trailing [EOS]."""
        return self.ids[:-1] if self.ids and self.ids[-1] == EOS else self.ids


def sort_hypotheses(hyps: list[Hypothesis]) -> list[Hypothesis]:
    return sorted(hyps, key=lambda h: (-h.forward_logprob, h.ids))


def beam_nbest(
    model: DialogModel,
    assembly: ContextAssembly,
    beam_size: int,
    n_best: int,
    max_tgt_len: int | None = None,
) -> list[Hypothesis]:
    """Top-``n_best`` completed hypotheses by forward log-probability."""
    if not 1 <= n_best <= beam_size:
        raise ValueError(f"need beam_size >= n_best >= 1, got {beam_size}, {n_best}")
    cap = model.cfg.max_tgt_len if max_tgt_len is None else min(max_tgt_len, model.cfg.max_tgt_len)

    model.eval()
    batch = AssemblyBatch([assembly])
    memory = model.encode_batch(batch)
    content_ids = range(NUM_SPECIALS, model.cfg.vocab_size)

    alive: list[tuple[tuple[int, ...], float]] = [((), 0.0)]
    finished: list[Hypothesis] = []
    with torch.no_grad():
        return _search(model, batch, memory, content_ids, alive, finished, beam_size, cap)[:n_best]


def _search(model, batch, memory, content_ids, alive, finished, beam_size, cap):
    for _ in range(cap):
        mem = memory.expand(len(alive), -1, -1)
        valid = batch.valid.expand(len(alive), -1)
        logprobs = model.step_logprobs(mem, valid, [list(ids) for ids, _ in alive])
        candidates: list[tuple[tuple[int, ...], float]] = []
        for i, (ids, score) in enumerate(alive):
            row = logprobs[i]
            finished.append(Hypothesis(ids + (EOS,), score + float(row[EOS])))
            for tok in content_ids:
                candidates.append((ids + (tok,), score + float(row[tok])))
        candidates.sort(key=lambda c: (-c[1], c[0]))
        alive = candidates[:beam_size]
    finished.extend(Hypothesis(ids, score) for ids, score in alive)
    return sort_hypotheses(finished)
