"""Bit-exact readers/writers for the two visual feature file formats.

VDF1 (coarse, one vector per image)::

    bytes "VDF1" | u32 count | u32 dim | count*dim float32

VOF1 (objects, a variable-size set of vectors per image)::

    bytes "VOF1" | u32 num_images | u32 dim | per image: u32 m_j, m_j*dim float32

All integers and floats are little-endian. Loading validates magic, a
nonzero dim, exact payload size and finiteness; stores are immutable after
construction and safe for concurrent reads.
"""

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BadMagic, EmptyObjectSet, NonFinite, Truncated, ZeroDim

COARSE_MAGIC = b"VDF1"
OBJECT_MAGIC = b"VOF1"


@dataclass(frozen=True)
class CoarseFeatureStore:
    """count x dim matrix of per-image pooled feature vectors."""

    data: np.ndarray  # float32, shape (count, dim)

    def __post_init__(self):
        object.__setattr__(self, "data", np.ascontiguousarray(self.data, dtype=np.float32))
        if self.data.ndim != 2:
            raise ValueError("coarse store expects a 2-D array")
        self.data.setflags(write=False)

    @property
    def count(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def vector(self, idx: int) -> np.ndarray:
        return self.data[idx]


@dataclass(frozen=True)
class ObjectFeatureStore:
    """Per-image sets of object vectors, all of one dimension."""

    images: tuple[np.ndarray, ...]  # each float32, shape (m_j, dim), m_j >= 1
    dim: int

    def __post_init__(self):
        frozen = []
        for mat in self.images:
            mat = np.ascontiguousarray(mat, dtype=np.float32)
            if mat.ndim != 2 or mat.shape[1] != self.dim:
                raise ValueError("object matrix shape disagrees with store dim")
            if mat.shape[0] < 1:
                raise EmptyObjectSet("every image needs at least one object vector")
            mat.setflags(write=False)
            frozen.append(mat)
        object.__setattr__(self, "images", tuple(frozen))

    @property
    def count(self) -> int:
        return len(self.images)

    def objects(self, idx: int) -> np.ndarray:
        return self.images[idx]


def _read_exact(buf: memoryview, offset: int, size: int, what: str) -> memoryview:
    if offset + size > len(buf):
        raise Truncated(f"{what}: need {size} bytes at offset {offset}, file has {len(buf)}")
    return buf[offset : offset + size]


def load_coarse_features(path) -> CoarseFeatureStore:
    raw = memoryview(Path(path).read_bytes())
    if bytes(_read_exact(raw, 0, 4, "magic")) != COARSE_MAGIC:
        raise BadMagic(f"{path}: not a VDF1 file")
    count, dim = struct.unpack_from("<II", raw, 4)
    if dim == 0:
        raise ZeroDim(f"{path}: dim = 0")
    payload = _read_exact(raw, 12, count * dim * 4, "coarse payload")
    if len(raw) != 12 + count * dim * 4:
        raise Truncated(f"{path}: {len(raw) - 12 - count * dim * 4} trailing bytes")
    data = np.frombuffer(payload, dtype="<f4").reshape(count, dim)
    if not np.isfinite(data).all():
        raise NonFinite(f"{path}: payload contains NaN/inf")
    return CoarseFeatureStore(data=data.astype(np.float32))


def write_coarse_features(store: CoarseFeatureStore, path) -> None:
    with open(path, "wb") as f:
        f.write(COARSE_MAGIC)
        f.write(struct.pack("<II", store.count, store.dim))
        f.write(store.data.astype("<f4").tobytes())


def load_object_features(path) -> ObjectFeatureStore:
    raw = memoryview(Path(path).read_bytes())
    if bytes(_read_exact(raw, 0, 4, "magic")) != OBJECT_MAGIC:
        raise BadMagic(f"{path}: not a VOF1 file")
    num_images, dim = struct.unpack_from("<II", raw, 4)
    if dim == 0:
        raise ZeroDim(f"{path}: dim = 0")
    images = []
    offset = 12
    for j in range(num_images):
        (m,) = struct.unpack_from("<I", _read_exact(raw, offset, 4, f"object count {j}"), 0)
        offset += 4
        if m == 0:
            raise EmptyObjectSet(f"{path}: image {j} declares zero objects")
        payload = _read_exact(raw, offset, m * dim * 4, f"objects of image {j}")
        offset += m * dim * 4
        mat = np.frombuffer(payload, dtype="<f4").reshape(m, dim)
        if not np.isfinite(mat).all():
            raise NonFinite(f"{path}: image {j} contains NaN/inf")
        images.append(mat.astype(np.float32))
    if offset != len(raw):
        raise Truncated(f"{path}: {len(raw) - offset} trailing bytes")
    return ObjectFeatureStore(images=tuple(images), dim=dim)


def write_object_features(store: ObjectFeatureStore, path) -> None:
    with open(path, "wb") as f:
        f.write(OBJECT_MAGIC)
        f.write(struct.pack("<II", store.count, store.dim))
        for mat in store.images:
            f.write(struct.pack("<I", mat.shape[0]))
            f.write(mat.astype("<f4").tobytes())
