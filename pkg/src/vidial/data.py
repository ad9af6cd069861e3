"""Dialog data model and the JSONL episode file format.

One episode per line::

    {"id": "...", "turns": [{"text": "...", "coarse": 0, "objects": 0}, ...]}

``load_dataset`` validates feature indices against the loaded stores and
encodes turn text with a vocabulary. When no vocabulary is given, one is
built from the file itself (deterministically), so two commands reading the
same file agree on ids without sharing state.
"""

import json
from dataclasses import dataclass
from pathlib import Path

from . import vocab as V
from .errors import EpisodeTooShort, IndexOutOfRange, MalformedRecord
from .featio import CoarseFeatureStore, ObjectFeatureStore
from .vocab import Vocabulary, build_vocab, encode_text


@dataclass(frozen=True)
class Turn:
    """One utterance paired with indices into the visual feature stores.

    ``tokens`` never contains structural ids ([PAD]/[CLS]/[SEP]/[EOI]/[BOS]/
    [EOS]); [UNK] is allowed since it stands in for an out-of-vocabulary word.
    """

    tokens: tuple[int, ...]
    coarse_idx: int
    object_idx: int

    def __post_init__(self):
        if len(self.tokens) < 1:
            raise MalformedRecord("turn with no tokens")
        if any(t in V.STRUCTURAL_IDS for t in self.tokens):
            raise MalformedRecord("structural special id inside turn content")


@dataclass(frozen=True)
class Episode:
    id: str
    turns: tuple[Turn, ...]

    def __post_init__(self):
        if len(self.turns) < 2:
            raise EpisodeTooShort(f"episode {self.id!r} has {len(self.turns)} turn(s)")

    def __len__(self) -> int:
        return len(self.turns)


@dataclass(frozen=True)
class Dataset:
    episodes: tuple[Episode, ...]
    vocab: Vocabulary

    def __len__(self) -> int:
        return len(self.episodes)

    def examples(self) -> list[tuple[int, int]]:
        """All (episode index, j) pairs with 1 <= j < n, in file order."""
        return [(e, j) for e, ep in enumerate(self.episodes) for j in range(1, len(ep))]


def _parse_episode_record(line: str, lineno: int) -> dict:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(f"line {lineno}: {exc}") from None
    if not isinstance(rec, dict) or "id" not in rec or "turns" not in rec:
        raise MalformedRecord(f"line {lineno}: expected object with 'id' and 'turns'")
    return rec


def read_episode_texts(path) -> list[str]:
    """All turn texts in file order (used to build a vocabulary)."""
    texts = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            rec = _parse_episode_record(line, lineno)
            for turn in rec["turns"]:
                if not isinstance(turn, dict) or "text" not in turn:
                    raise MalformedRecord(f"line {lineno}: turn without 'text'")
                texts.append(turn["text"])
    return texts


def load_dataset(
    episodes_path,
    coarse_store: CoarseFeatureStore | None = None,
    object_store: ObjectFeatureStore | None = None,
    vocabulary: Vocabulary | None = None,
    max_vocab: int = 32768,
) -> Dataset:
    """Parse episodes, encode text, and validate feature indices.

    Indices are only checked against the stores that are actually supplied,
    so a text-only pipeline may pass ``None`` for either store.
    """
    if vocabulary is None:
        vocabulary = build_vocab(read_episode_texts(episodes_path), max_size=max_vocab)
    episodes = []
    with open(episodes_path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            rec = _parse_episode_record(line, lineno)
            turns = []
            for turn in rec["turns"]:
                try:
                    tokens = tuple(encode_text(vocabulary, turn["text"]))
                    coarse_idx = int(turn["coarse"])
                    object_idx = int(turn["objects"])
                except (KeyError, TypeError, ValueError) as exc:
                    raise MalformedRecord(f"line {lineno}: {exc}") from None
                if coarse_store is not None and not 0 <= coarse_idx < coarse_store.count:
                    raise IndexOutOfRange(
                        f"line {lineno}: coarse index {coarse_idx} not in [0, {coarse_store.count})"
                    )
                if object_store is not None and not 0 <= object_idx < object_store.count:
                    raise IndexOutOfRange(
                        f"line {lineno}: object index {object_idx} not in [0, {object_store.count})"
                    )
                turns.append(Turn(tokens=tokens, coarse_idx=coarse_idx, object_idx=object_idx))
            episodes.append(Episode(id=str(rec["id"]), turns=tuple(turns)))
    return Dataset(episodes=tuple(episodes), vocab=vocabulary)


def write_episode_file(records: list[dict], path) -> None:
    """Write raw episode records (dicts in the wire schema) as JSONL."""
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec, ensure_ascii=False, separators=(",", ":")) + "\n")


def episode_to_record(episode_id: str, turn_texts, coarse_indices, object_indices) -> dict:
    return {
        "id": episode_id,
        "turns": [
            {"text": t, "coarse": int(c), "objects": int(o)}
            for t, c, o in zip(turn_texts, coarse_indices, object_indices, strict=True)
        ],
    }


def dataset_paths(directory) -> dict[str, Path]:
    """Canonical file names inside a corpus directory."""
    d = Path(directory)
    return {
        "episodes": d / "episodes.jsonl",
        "coarse": d / "coarse.vdf1",
        "objects": d / "objects.vof1",
        "manifest": d / "manifest.json",
    }
