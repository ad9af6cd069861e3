import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vidial.errors import BadMagic, EmptyObjectSet, NonFinite, Truncated, ZeroDim
from vidial.featio import (
    CoarseFeatureStore,
    ObjectFeatureStore,
    load_coarse_features,
    load_object_features,
    write_coarse_features,
    write_object_features,
)


def _coarse_bytes(count, dim, payload: bytes) -> bytes:
    return b"VDF1" + struct.pack("<II", count, dim) + payload


def test_coarse_happy_path(tmp_path):
    path = tmp_path / "f.vdf1"
    payload = struct.pack("<8f", *range(8))
    path.write_bytes(_coarse_bytes(2, 4, payload))
    store = load_coarse_features(path)
    assert store.count == 2 and store.dim == 4
    assert store.vector(1).tolist() == [4.0, 5.0, 6.0, 7.0]


def test_coarse_bad_magic(tmp_path):
    path = tmp_path / "f.vdf1"
    path.write_bytes(b"XXXX" + struct.pack("<II", 1, 1) + struct.pack("<f", 0.0))
    with pytest.raises(BadMagic):
        load_coarse_features(path)


def test_coarse_zero_dim(tmp_path):
    path = tmp_path / "f.vdf1"
    path.write_bytes(_coarse_bytes(1, 0, b""))
    with pytest.raises(ZeroDim):
        load_coarse_features(path)


def test_coarse_truncated(tmp_path):
    path = tmp_path / "f.vdf1"
    payload = struct.pack("<8f", *range(8))  # only 2 of 3 declared rows
    path.write_bytes(_coarse_bytes(3, 4, payload))
    with pytest.raises(Truncated):
        load_coarse_features(path)


def test_coarse_trailing_bytes_rejected(tmp_path):
    path = tmp_path / "f.vdf1"
    path.write_bytes(_coarse_bytes(1, 2, struct.pack("<2f", 0, 1)) + b"junk")
    with pytest.raises(Truncated):
        load_coarse_features(path)


def test_coarse_nonfinite(tmp_path):
    path = tmp_path / "f.vdf1"
    path.write_bytes(_coarse_bytes(1, 2, struct.pack("<2f", 1.0, float("nan"))))
    with pytest.raises(NonFinite):
        load_coarse_features(path)


def test_object_happy_path(tmp_path):
    path = tmp_path / "o.vof1"
    body = struct.pack("<I", 2) + struct.pack("<6f", *range(6))
    path.write_bytes(b"VOF1" + struct.pack("<II", 1, 3) + body)
    store = load_object_features(path)
    assert store.count == 1 and store.dim == 3
    assert store.objects(0).shape == (2, 3)


def test_object_empty_set(tmp_path):
    path = tmp_path / "o.vof1"
    path.write_bytes(b"VOF1" + struct.pack("<II", 1, 3) + struct.pack("<I", 0))
    with pytest.raises(EmptyObjectSet):
        load_object_features(path)


def test_object_short_payload(tmp_path):
    path = tmp_path / "o.vof1"
    body = struct.pack("<I", 1) + struct.pack("<2f", 0, 1)  # 4 bytes short of 1x3
    path.write_bytes(b"VOF1" + struct.pack("<II", 1, 3) + body)
    with pytest.raises(Truncated):
        load_object_features(path)


def test_coarse_round_trip_bytes(tmp_path):
    rng = np.random.default_rng(0)
    store = CoarseFeatureStore(data=rng.standard_normal((5, 7)).astype(np.float32))
    p1, p2 = tmp_path / "a.vdf1", tmp_path / "b.vdf1"
    write_coarse_features(store, p1)
    write_coarse_features(load_coarse_features(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_object_round_trip_bytes(tmp_path):
    rng = np.random.default_rng(1)
    mats = tuple(rng.standard_normal((m, 4)).astype(np.float32) for m in (1, 3, 2))
    store = ObjectFeatureStore(images=mats, dim=4)
    p1, p2 = tmp_path / "a.vof1", tmp_path / "b.vof1"
    write_object_features(store, p1)
    write_object_features(load_object_features(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


@settings(deadline=None, max_examples=25)
@given(
    count=st.integers(min_value=1, max_value=4),
    dim=st.integers(min_value=1, max_value=5),
    seed=st.integers(min_value=0, max_value=2**31),
)
def test_coarse_round_trip_property(tmp_path_factory, count, dim, seed):
    rng = np.random.default_rng(seed)
    store = CoarseFeatureStore(data=rng.standard_normal((count, dim)).astype(np.float32))
    path = tmp_path_factory.mktemp("rt") / "s.vdf1"
    write_coarse_features(store, path)
    loaded = load_coarse_features(path)
    assert np.array_equal(loaded.data, store.data)


def test_stores_are_immutable(small_corpus):
    _, coarse, objects, _ = small_corpus
    with pytest.raises(ValueError):
        coarse.data[0, 0] = 1.0
    with pytest.raises(ValueError):
        objects.objects(0)[0, 0] = 1.0
