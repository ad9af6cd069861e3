import pytest

from vidial.adversarial import AdvConfig, adversarial_eval
from vidial.errors import MalformedRecord, SplitOverlap, Unbalanced
from vidial.synthetic import SyntheticSpec, generate_synthetic


@pytest.fixture(scope="module")
def world():
    dataset, coarse, _, _ = generate_synthetic(
        SyntheticSpec(num_episodes=16, vocab_size=32, num_latent_classes=2, coarse_dim=4, seed=21)
    )
    generated = {}
    for e, j in dataset.examples():
        ep = dataset.episodes[e]
        generated[(ep.id, j)] = list(ep.turns[j].tokens)  # verbatim gold copies
    cfg = AdvConfig(vocab_size=len(dataset.vocab), d_visual=coarse.dim,
                    d_model=32, ffn_dim=64, heads=2, steps=40, batch_size=8)
    ids = [ep.id for ep in dataset.episodes]
    return dataset, coarse, generated, cfg, ids


def test_split_overlap_rejected(world):
    dataset, coarse, generated, cfg, ids = world
    with pytest.raises(SplitOverlap):
        adversarial_eval(dataset, generated, coarse, set(ids[:9]), set(ids[8:]), cfg, seed=0)


def test_unbalanced_split_rejected(world):
    dataset, coarse, generated, cfg, ids = world
    with pytest.raises(Unbalanced):
        adversarial_eval(dataset, generated, coarse, set(ids[:8]), set(), cfg, seed=0)


def test_missing_generated_response_rejected(world):
    dataset, coarse, _, cfg, ids = world
    with pytest.raises(MalformedRecord):
        adversarial_eval(dataset, {}, coarse, set(ids[:8]), set(ids[8:]), cfg, seed=0)


def test_result_in_unit_interval_and_deterministic(world):
    dataset, coarse, generated, cfg, ids = world
    s1 = adversarial_eval(dataset, generated, coarse, set(ids[:8]), set(ids[8:]), cfg, seed=5)
    s2 = adversarial_eval(dataset, generated, coarse, set(ids[:8]), set(ids[8:]), cfg, seed=5)
    assert 0.0 <= s1 <= 1.0
    assert s1 == s2
