"""Vocabulary with a fixed block of special token ids.

Ids 0..6 are reserved in this exact order so that checkpoints, feature files
and response files stay interchangeable across runs regardless of corpus
content. Regular tokens occupy the dense id range 7..|V|-1.
"""

from collections import Counter
from dataclasses import dataclass, field

PAD, CLS, SEP, EOI, BOS, EOS, UNK = range(7)

SPECIAL_TOKENS = ("[PAD]", "[CLS]", "[SEP]", "[EOI]", "[BOS]", "[EOS]", "[UNK]")
NUM_SPECIALS = len(SPECIAL_TOKENS)

# Ids that delimit structure; they must never appear inside turn content.
STRUCTURAL_IDS = frozenset((PAD, CLS, SEP, EOI, BOS, EOS))


@dataclass(frozen=True)
class Vocabulary:
    """Bijective token <-> id map over the non-special tokens.

    ``tokens[i]`` is the surface form of id ``i``; the first seven entries are
    always ``SPECIAL_TOKENS``.
    """

    tokens: tuple[str, ...]
    ids: dict[str, int] = field(compare=False)

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def words(self) -> tuple[str, ...]:
        """Non-special tokens, in id order."""
        return self.tokens[NUM_SPECIALS:]

    def id_of(self, token: str) -> int:
        return self.ids.get(token, UNK)

    def decode(self, ids, drop_specials: bool = True) -> str:
        """Space-join surface forms; structural ids are dropped by default.

        [UNK] is kept (it stands for a real word), trailing/embedded
        structural tokens such as [EOS] are not part of surface text.
        """
        parts = []
        for i in ids:
            if drop_specials and i in STRUCTURAL_IDS:
                continue
            parts.append(self.tokens[i])
        return " ".join(parts)


def from_words(words) -> Vocabulary:
    """Build a Vocabulary from an ordered iterable of non-special tokens."""
    tokens = SPECIAL_TOKENS + tuple(words)
    ids = {t: i for i, t in enumerate(tokens)}
    if len(ids) != len(tokens):
        raise ValueError("duplicate tokens in vocabulary")
    return Vocabulary(tokens=tokens, ids=ids)


def build_vocab(texts, max_size: int, min_freq: int = 1) -> Vocabulary:
    """Count whitespace tokens and keep the most frequent ones.

    Tokens are lowercased before counting. Ranking is frequency descending
    with ties broken lexicographically; tokens seen fewer than ``min_freq``
    times are excluded. The result, including the seven specials, never
    exceeds ``max_size`` entries. An empty corpus yields a specials-only
    vocabulary.
    """
    if max_size <= NUM_SPECIALS:
        raise ValueError(f"max_size must exceed {NUM_SPECIALS}, got {max_size}")
    counts = Counter()
    for text in texts:
        counts.update(text.lower().split())
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    words = [w for w, c in ranked if c >= min_freq]
    return from_words(words[: max_size - NUM_SPECIALS])


def encode_text(vocab: Vocabulary, text: str) -> list[int]:
    """Lowercase, whitespace-split, and map to ids; OOV becomes [UNK].

    No [BOS]/[EOS] framing is added here; the model boundary owns that.
    """
    return [vocab.id_of(tok) for tok in text.lower().split()]
