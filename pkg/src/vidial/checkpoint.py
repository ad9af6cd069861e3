"""VCKPT1 checkpoint container.

Layout (all integers little-endian)::

    bytes "VCKPT1" | u32 version | u32 config_len | config JSON (UTF-8)
    | u32 n_tensors | per tensor: u32 name_len, name, u32 rank,
      rank * u32 dims, float32 payload

The config JSON always carries a "component" tag ("forward", "backward",
"discriminator") so the wrong artifact cannot be loaded silently, plus
whatever the component needs to rebuild itself (model config, vocabulary).
Parameters are stored and restored as float32, which makes the round trip
bit-exact for float32 models.
"""

import json
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np
import torch

from .config import ModelConfig
from .errors import CorruptCheckpoint, VersionMismatch
from .model import DialogModel
from .vocab import Vocabulary, from_words

MAGIC = b"VCKPT1"
FORMAT_VERSION = 1


def _read(buf: memoryview, offset: int, size: int, what: str):
    if offset + size > len(buf):
        raise CorruptCheckpoint(f"truncated while reading {what}")
    return buf[offset : offset + size], offset + size


def save_tensors(path, component: str, config: dict, tensors: dict[str, torch.Tensor]) -> None:
    config = dict(config)
    config["component"] = component
    config_bytes = json.dumps(config, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", FORMAT_VERSION))
        f.write(struct.pack("<I", len(config_bytes)))
        f.write(config_bytes)
        f.write(struct.pack("<I", len(tensors)))
        for name, tensor in tensors.items():
            arr = tensor.detach().cpu().numpy().astype("<f4")
            name_bytes = name.encode("utf-8")
            f.write(struct.pack("<I", len(name_bytes)))
            f.write(name_bytes)
            f.write(struct.pack("<I", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(arr.tobytes())


def load_tensors(path):
    """Returns (config dict, {name: float32 tensor})."""
    raw = memoryview(Path(path).read_bytes())
    head, offset = _read(raw, 0, 6, "magic")
    if bytes(head) != MAGIC:
        raise CorruptCheckpoint(f"{path}: bad magic")
    head, offset = _read(raw, offset, 4, "version")
    (version,) = struct.unpack("<I", head)
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    head, offset = _read(raw, offset, 4, "config length")
    (config_len,) = struct.unpack("<I", head)
    head, offset = _read(raw, offset, config_len, "config")
    try:
        config = json.loads(bytes(head).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptCheckpoint(f"{path}: unreadable config: {exc}") from None
    head, offset = _read(raw, offset, 4, "tensor count")
    (n_tensors,) = struct.unpack("<I", head)
    tensors = {}
    for _ in range(n_tensors):
        head, offset = _read(raw, offset, 4, "name length")
        (name_len,) = struct.unpack("<I", head)
        head, offset = _read(raw, offset, name_len, "name")
        name = bytes(head).decode("utf-8")
        head, offset = _read(raw, offset, 4, "rank")
        (rank,) = struct.unpack("<I", head)
        head, offset = _read(raw, offset, 4 * rank, "dims")
        dims = struct.unpack(f"<{rank}I", head)
        size = 4 * int(np.prod(dims)) if rank else 4
        head, offset = _read(raw, offset, size, f"payload of {name}")
        arr = np.frombuffer(head, dtype="<f4").reshape(dims)
        tensors[name] = torch.from_numpy(arr.copy())
    if offset != len(raw):
        raise CorruptCheckpoint(f"{path}: {len(raw) - offset} trailing bytes")
    return config, tensors


def component_of(path) -> str:
    config, _ = load_tensors(path)
    return config.get("component", "")


def save_checkpoint(
    model: DialogModel, path, vocabulary: Vocabulary, component: str = "forward"
) -> None:
    config = {
        "model": asdict(model.cfg),
        "vocab_words": list(vocabulary.words),
    }
    save_tensors(path, component, config, dict(model.state_dict()))


def load_checkpoint(path, expect_component: str | None = None, expect_mode: str | None = None):
    """Rebuild (DialogModel, ModelConfig, Vocabulary) from a VCKPT1 file."""
    config, tensors = load_tensors(path)
    component = config.get("component")
    if expect_component is not None and component != expect_component:
        raise VersionMismatch(f"{path}: component {component!r}, expected {expect_component!r}")
    try:
        cfg = ModelConfig(**config["model"])
        vocabulary = from_words(config["vocab_words"])
    except (KeyError, TypeError) as exc:
        raise CorruptCheckpoint(f"{path}: config missing fields: {exc}") from None
    if expect_mode is not None and cfg.mode != expect_mode:
        raise VersionMismatch(f"{path}: checkpoint mode {cfg.mode!r}, expected {expect_mode!r}")
    model = DialogModel(cfg, seed=0)
    try:
        model.load_state_dict({k: v for k, v in tensors.items()})
    except RuntimeError as exc:
        raise CorruptCheckpoint(f"{path}: parameter shapes disagree: {exc}") from None
    model.eval()
    return model, cfg, vocabulary
