"""Mode-specific encoder input layouts.

For a context of turns 1..j (predicting turn j+1), the three layouts are::

    nv:  x_1 [SEP] x_2 [SEP] ... x_j [SEP]
    cv:  [CLS] x_1 [SEP] ... x_j [SEP] <img> [SEP]
    fv:  [CLS] o_1.. o_(j+1).. [EOI] x_1 [SEP] ... x_j [SEP]

In cv, every token position of turn k additionally carries the raw image
vector f_k of that turn, and the <img> slot carries f_(j+1) with no token id
at all. In fv, the object positions carry raw object vectors tagged with a
1-based image index. Raw here means unprojected: the model's learned
visual projection is applied inside the encoder so the projection weight
participates in autograd like any other parameter.

Truncation drops oldest turns whole (fv drops the paired image as well) and
renumbers turn/image indices from 1 within the surviving window. A window
also never holds more than ``max_turns`` turns so positional tables stay in
range.
"""

from dataclasses import dataclass

import numpy as np
import torch

from .config import MODE_CV, MODE_FV, MODE_NV, ModelConfig
from .data import Episode
from .errors import ContextEmpty, DimMismatch, EmptyUtterance
from .featio import CoarseFeatureStore, ObjectFeatureStore
from .vocab import CLS, EOI, SEP


@dataclass
class ContextAssembly:
    """One encoder input: per-position ids, index tags and raw visual rows."""

    mode: str
    ids: torch.Tensor  # long [L], 0 where has_token is False
    has_token: torch.Tensor  # bool [L]
    turn_index: torch.Tensor  # long [L], 0 = not part of a turn
    image_index: torch.Tensor  # long [L], 0 = not an object position
    visual: torch.Tensor | None  # float32 [L, d_visual]
    has_visual: torch.Tensor  # bool [L]

    def __len__(self) -> int:
        return int(self.ids.shape[0])


def _check_j(episode: Episode, j: int) -> None:
    if not 1 <= j < len(episode):
        raise ValueError(f"j must satisfy 1 <= j < {len(episode)}, got {j}")


def _window(episode: Episode, j: int, cfg: ModelConfig, overhead, extra_per_turn):
    """Oldest-first truncation: keep the longest suffix of turns 1..j that
    fits in max_src_len and max_turns. ``overhead`` is the fixed position
    cost outside the turns; ``extra_per_turn(k)`` covers mode-specific cost
    of turn k beyond its tokens + [SEP] (fv object counts)."""
    turns = episode.turns[:j]
    start = 0
    while True:
        window = turns[start:]
        if not window:
            raise ContextEmpty(f"no context turns fit in max_src_len={cfg.max_src_len}")
        length = overhead + sum(
            len(t.tokens) + 1 + extra_per_turn(start + k) for k, t in enumerate(window)
        )
        if length <= cfg.max_src_len and len(window) <= cfg.max_turns:
            return start, window
        start += 1


def _finish(mode, ids, has_token, turn_index, image_index, visual_rows, has_visual):
    visual = None
    if visual_rows is not None:
        visual = torch.from_numpy(np.ascontiguousarray(np.stack(visual_rows), dtype=np.float32))
    return ContextAssembly(
        mode=mode,
        ids=torch.tensor(ids, dtype=torch.long),
        has_token=torch.tensor(has_token, dtype=torch.bool),
        turn_index=torch.tensor(turn_index, dtype=torch.long),
        image_index=torch.tensor(image_index, dtype=torch.long),
        visual=visual,
        has_visual=torch.tensor(has_visual, dtype=torch.bool),
    )


def assemble_nv(episode: Episode, j: int, cfg: ModelConfig) -> ContextAssembly:
    """Text-only layout: turns joined by [SEP], no visual rows."""
    _check_j(episode, j)
    _, window = _window(episode, j, cfg, overhead=0, extra_per_turn=lambda k: 0)
    ids, turn_index = [], []
    for k, turn in enumerate(window, start=1):
        ids.extend(turn.tokens)
        ids.append(SEP)
        turn_index.extend([k] * (len(turn.tokens) + 1))
    n = len(ids)
    return _finish(MODE_NV, ids, [True] * n, turn_index, [0] * n, None, [False] * n)


def assemble_cv(
    episode: Episode, j: int, cfg: ModelConfig, coarse_store: CoarseFeatureStore
) -> ContextAssembly:
    """Coarse layout: token positions carry their turn's image vector and a
    dedicated content-only slot carries the upcoming image's vector."""
    _check_j(episode, j)
    if coarse_store.dim != cfg.d_visual:
        raise DimMismatch(f"coarse store dim {coarse_store.dim} != d_visual {cfg.d_visual}")
    _, window = _window(episode, j, cfg, overhead=3, extra_per_turn=lambda k: 0)

    zero = np.zeros(cfg.d_visual, dtype=np.float32)
    ids, has_token, turn_index, visual_rows, has_visual = [CLS], [True], [0], [zero], [False]
    for k, turn in enumerate(window, start=1):
        f_k = coarse_store.vector(turn.coarse_idx)
        for tok in turn.tokens:
            ids.append(tok)
            has_token.append(True)
            turn_index.append(k)
            visual_rows.append(f_k)
            has_visual.append(True)
        ids.append(SEP)
        has_token.append(True)
        turn_index.append(k)
        visual_rows.append(zero)
        has_visual.append(False)
    # Upcoming image: a content-only position (no token embedding), then [SEP].
    ids.extend([0, SEP])
    has_token.extend([False, True])
    turn_index.extend([0, 0])
    visual_rows.extend([coarse_store.vector(episode.turns[j].coarse_idx), zero])
    has_visual.extend([True, False])
    n = len(ids)
    return _finish(MODE_CV, ids, has_token, turn_index, [0] * n, visual_rows, has_visual)


def assemble_fv(
    episode: Episode, j: int, cfg: ModelConfig, object_store: ObjectFeatureStore
) -> ContextAssembly:
    """Fine layout: all object vectors of images 1..j+1 as a tagged prefix,
    then the text turns. Truncation drops (turn, image) pairs together."""
    _check_j(episode, j)
    if object_store.dim != cfg.d_visual:
        raise DimMismatch(f"object store dim {object_store.dim} != d_visual {cfg.d_visual}")

    counts = [object_store.objects(t.object_idx).shape[0] for t in episode.turns[: j + 1]]
    # prefix = [CLS] + objects of images start..j+1 + [EOI]; image j+1 always stays
    start, window = _window(
        episode, j, cfg, overhead=2 + counts[j], extra_per_turn=lambda k: counts[k]
    )

    zero = np.zeros(cfg.d_visual, dtype=np.float32)
    ids, has_token, turn_index, image_index = [CLS], [True], [0], [0]
    visual_rows, has_visual = [zero], [False]
    for img_pos, turn in enumerate(episode.turns[start : j + 1], start=1):
        for obj in object_store.objects(turn.object_idx):
            ids.append(0)
            has_token.append(False)
            turn_index.append(0)
            image_index.append(img_pos)
            visual_rows.append(obj)
            has_visual.append(True)
    ids.append(EOI)
    has_token.append(True)
    turn_index.append(0)
    image_index.append(0)
    visual_rows.append(zero)
    has_visual.append(False)

    for k, turn in enumerate(window, start=1):
        for tok in turn.tokens:
            ids.append(tok)
            has_token.append(True)
            turn_index.append(k)
            image_index.append(0)
            visual_rows.append(zero)
            has_visual.append(False)
        ids.append(SEP)
        has_token.append(True)
        turn_index.append(k)
        image_index.append(0)
        visual_rows.append(zero)
        has_visual.append(False)
    return _finish(MODE_FV, ids, has_token, turn_index, image_index, visual_rows, has_visual)


def assemble_utterance(tokens, cfg: ModelConfig) -> ContextAssembly:
    """NV layout of a single utterance: tokens + [SEP], all turn index 1.

    Used wherever a lone utterance is encoded (reversed-pair training and
    the match discriminators); over-long utterances keep their head.
    """
    tokens = list(tokens)
    if not tokens:
        raise EmptyUtterance("cannot assemble an empty utterance")
    tokens = tokens[: cfg.max_src_len - 1]
    ids = tokens + [SEP]
    n = len(ids)
    return _finish(MODE_NV, ids, [True] * n, [1] * n, [0] * n, None, [False] * n)


def assemble(
    episode: Episode,
    j: int,
    cfg: ModelConfig,
    coarse_store: CoarseFeatureStore | None = None,
    object_store: ObjectFeatureStore | None = None,
) -> ContextAssembly:
    """Dispatch on cfg.mode."""
    if cfg.mode == MODE_NV:
        return assemble_nv(episode, j, cfg)
    if cfg.mode == MODE_CV:
        if coarse_store is None:
            raise DimMismatch("cv mode requires a coarse feature store")
        return assemble_cv(episode, j, cfg, coarse_store)
    if object_store is None:
        raise DimMismatch("fv mode requires an object feature store")
    return assemble_fv(episode, j, cfg, object_store)
