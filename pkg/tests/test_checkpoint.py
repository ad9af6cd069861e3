import pytest
import torch

from vidial.assembly import assemble_nv
from vidial.checkpoint import load_checkpoint, load_tensors, save_checkpoint
from vidial.config import tiny_config
from vidial.errors import CorruptCheckpoint, VersionMismatch
from vidial.model import DialogModel


@pytest.fixture()
def trained(small_corpus):
    dataset, _, _, _ = small_corpus
    cfg = tiny_config("nv", len(dataset.vocab))
    model = DialogModel(cfg, seed=7)
    model.eval()
    return dataset, cfg, model


def test_round_trip_preserves_logits_bit_exactly(tmp_path, trained):
    dataset, cfg, model = trained
    path = tmp_path / "m.vckpt"
    save_checkpoint(model, path, dataset.vocab)
    loaded, loaded_cfg, vocabulary = load_checkpoint(path, expect_component="forward")
    assert loaded_cfg == cfg
    assert vocabulary.tokens == dataset.vocab.tokens
    episode = dataset.episodes[0]
    assembly = assemble_nv(episode, 1, cfg)
    target = list(episode.turns[1].tokens)
    with torch.no_grad():
        assert torch.equal(model.encode(assembly), loaded.encode(assembly))
        assert float(model.sequence_nll(assembly, target)) == float(
            loaded.sequence_nll(assembly, target)
        )


def test_truncated_file_is_corrupt(tmp_path, trained):
    dataset, _, model = trained
    path = tmp_path / "m.vckpt"
    save_checkpoint(model, path, dataset.vocab)
    blob = path.read_bytes()
    path.write_bytes(blob[: len(blob) // 2])
    with pytest.raises(CorruptCheckpoint):
        load_checkpoint(path)


def test_bad_magic_is_corrupt(tmp_path):
    path = tmp_path / "m.vckpt"
    path.write_bytes(b"NOTAMAGIC" + b"\x00" * 32)
    with pytest.raises(CorruptCheckpoint):
        load_tensors(path)


def test_component_tag_mismatch(tmp_path, trained):
    dataset, _, model = trained
    path = tmp_path / "m.vckpt"
    save_checkpoint(model, path, dataset.vocab, component="forward")
    with pytest.raises(VersionMismatch):
        load_checkpoint(path, expect_component="backward")


def test_mode_tag_mismatch(tmp_path, small_corpus):
    dataset, coarse, _, _ = small_corpus
    cfg = tiny_config("cv", len(dataset.vocab), d_visual=coarse.dim)
    model = DialogModel(cfg, seed=0)
    path = tmp_path / "m.vckpt"
    save_checkpoint(model, path, dataset.vocab)
    with pytest.raises(VersionMismatch):
        load_checkpoint(path, expect_mode="nv")


def test_trailing_bytes_rejected(tmp_path, trained):
    dataset, _, model = trained
    path = tmp_path / "m.vckpt"
    save_checkpoint(model, path, dataset.vocab)
    path.write_bytes(path.read_bytes() + b"x")
    with pytest.raises(CorruptCheckpoint):
        load_tensors(path)
