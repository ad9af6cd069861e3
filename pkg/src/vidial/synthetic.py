"""Deterministic synthetic corpus with planted text-visual dependencies.

Every turn draws a latent class c. Its image feature is the c-th orthogonal
centroid plus Gaussian noise, its object set is a cloud of perturbed copies
of the same centroid, and its tokens come from the c-th slice of the word
inventory, except for one token copied from the previous turn. The copy
gives the reversed utterance model something to learn; the class band gives
the visual-fusion models something the text-only model cannot see.

Everything is a pure function of the spec (seed included): two runs emit
byte-identical files.
"""

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .data import Dataset, Episode, Turn, dataset_paths, episode_to_record, write_episode_file
from .errors import SpecInvalid
from .featio import (
    CoarseFeatureStore,
    ObjectFeatureStore,
    write_coarse_features,
    write_object_features,
)
from .vocab import NUM_SPECIALS, from_words

TOKENS_MIN = 3
TOKENS_MAX = 6


@dataclass(frozen=True)
class SyntheticSpec:
    num_episodes: int = 50
    turns_min: int = 4
    turns_max: int = 8
    vocab_size: int = 64
    num_latent_classes: int = 4
    coarse_dim: int = 16
    objects_per_image: int = 3
    noise_scale: float = 0.05
    seed: int = 0

    def validate(self) -> None:
        if self.num_episodes < 1:
            raise SpecInvalid("num_episodes must be >= 1")
        if self.turns_min < 2:
            raise SpecInvalid("turns_min must be >= 2 (need a context/target pair)")
        if self.turns_max < self.turns_min:
            raise SpecInvalid("turns_max must be >= turns_min")
        if self.num_latent_classes < 2:
            raise SpecInvalid("need at least 2 latent classes")
        if self.vocab_size <= NUM_SPECIALS + self.num_latent_classes:
            raise SpecInvalid(
                f"vocab_size must exceed {NUM_SPECIALS} specials + {self.num_latent_classes} classes"
            )
        if self.coarse_dim < self.num_latent_classes:
            raise SpecInvalid("coarse_dim must be >= num_latent_classes for orthogonal centroids")
        if self.objects_per_image < 1:
            raise SpecInvalid("objects_per_image must be >= 1")
        if self.noise_scale < 0:
            raise SpecInvalid("noise_scale must be >= 0")


def class_word_slices(spec: SyntheticSpec) -> list[list[str]]:
    """The word inventory split into one contiguous slice per latent class."""
    num_words = spec.vocab_size - NUM_SPECIALS
    words = [f"w{i:03d}" for i in range(num_words)]
    c = spec.num_latent_classes
    return [words[i * num_words // c : (i + 1) * num_words // c] for i in range(c)]


def generate_synthetic(spec: SyntheticSpec):
    """Build (Dataset, CoarseFeatureStore, ObjectFeatureStore, manifest)."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    slices = class_word_slices(spec)
    all_words = [w for s in slices for w in s]
    vocabulary = from_words(all_words)

    episodes = []
    episode_classes: dict[str, list[int]] = {}
    coarse_rows: list[np.ndarray] = []
    object_mats: list[np.ndarray] = []

    for e in range(spec.num_episodes):
        episode_id = f"ep{e:04d}"
        n_turns = int(rng.integers(spec.turns_min, spec.turns_max + 1))
        turns = []
        classes = []
        prev_words: list[str] | None = None
        for _ in range(n_turns):
            c = int(rng.integers(spec.num_latent_classes))
            classes.append(c)

            centroid = np.zeros(spec.coarse_dim)
            centroid[c] = 1.0
            coarse = centroid + spec.noise_scale * rng.standard_normal(spec.coarse_dim)
            coarse_rows.append(coarse.astype(np.float32))
            objs = centroid[None, :] + spec.noise_scale * rng.standard_normal(
                (spec.objects_per_image, spec.coarse_dim)
            )
            object_mats.append(objs.astype(np.float32))

            band = slices[c]
            length = int(rng.integers(TOKENS_MIN, TOKENS_MAX + 1))
            words = [band[int(rng.integers(len(band)))] for _ in range(length)]
            if prev_words is not None:
                src = int(rng.integers(len(prev_words)))
                pos = int(rng.integers(length))
                words[pos] = prev_words[src]
            image_idx = len(coarse_rows) - 1
            turns.append(
                Turn(
                    tokens=tuple(vocabulary.ids[w] for w in words),
                    coarse_idx=image_idx,
                    object_idx=image_idx,
                )
            )
            prev_words = words
        episodes.append(Episode(id=episode_id, turns=tuple(turns)))
        episode_classes[episode_id] = classes

    coarse_store = CoarseFeatureStore(data=np.stack(coarse_rows))
    object_store = ObjectFeatureStore(images=tuple(object_mats), dim=spec.coarse_dim)
    dataset = Dataset(episodes=tuple(episodes), vocab=vocabulary)
    manifest = {
        "spec": asdict(spec),
        "formats": {"episodes": "jsonl", "coarse": "VDF1", "objects": "VOF1"},
        "num_images": coarse_store.count,
        "class_words": slices,
        "episode_classes": episode_classes,
    }
    return dataset, coarse_store, object_store, manifest


def write_synthetic(spec: SyntheticSpec, out_dir) -> dict[str, Path]:
    """Generate and write episodes/VDF1/VOF1/manifest into ``out_dir``."""
    dataset, coarse_store, object_store, manifest = generate_synthetic(spec)
    paths = dataset_paths(out_dir)
    Path(out_dir).mkdir(parents=True, exist_ok=True)

    records = []
    for ep in dataset.episodes:
        texts = [dataset.vocab.decode(t.tokens) for t in ep.turns]
        records.append(
            episode_to_record(
                ep.id,
                texts,
                [t.coarse_idx for t in ep.turns],
                [t.object_idx for t in ep.turns],
            )
        )
    write_episode_file(records, paths["episodes"])
    write_coarse_features(coarse_store, paths["coarse"])
    write_object_features(object_store, paths["objects"])
    paths["manifest"].write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", "utf-8")
    return paths
