import pytest

from vidial.synthetic import SyntheticSpec, generate_synthetic


@pytest.fixture(scope="session")
def small_corpus():
    """A 12-episode corpus shared by tests that only read it."""
    return generate_synthetic(SyntheticSpec(num_episodes=12, seed=11, vocab_size=32))


@pytest.fixture(scope="session")
def tiny_vocab_corpus():
    """Minimal vocabulary (5 content words) for exhaustive decoding tests."""
    return generate_synthetic(
        SyntheticSpec(num_episodes=4, seed=2, vocab_size=12, num_latent_classes=2, coarse_dim=4)
    )
