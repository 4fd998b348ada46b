import io
import struct

import numpy as np
import pytest

from swinprobe.weights_io import (
    BadMagicError,
    DuplicatePathError,
    NamedWeights,
    TruncatedError,
    UnsupportedVersionError,
    load,
    load_file,
    save,
    save_file,
)


def roundtrip(weights: NamedWeights) -> tuple[NamedWeights, bytes]:
    sink = io.BytesIO()
    save(weights, sink)
    data = sink.getvalue()
    return load(io.BytesIO(data)), data


class TestSave:
    def test_empty_container_is_header_only(self):
        sink = io.BytesIO()
        n = save(NamedWeights(), sink)
        assert n == 16  # magic + version + entry count
        data = sink.getvalue()
        assert data[:4] == b"SWPT"
        assert struct.unpack("<Q", data[8:16]) == (0,)

    def test_single_entry_byte_count(self):
        w = NamedWeights()
        w.add("head.weight", np.zeros((2, 3), dtype=np.float32))
        sink = io.BytesIO()
        n = save(w, sink)
        # header + path_len + path + ndim + 2 dims + 6 floats
        assert n == 16 + 2 + len("head.weight") + 1 + 16 + 24
        assert n == len(sink.getvalue())

    def test_roundtrip_50_random_tensors_bitwise(self, rng):
        w = NamedWeights()
        for i in range(50):
            shape = tuple(rng.integers(1, 5, size=rng.integers(1, 4)))
            w.add(f"layer.{i}/param", rng.normal(size=shape).astype(np.float32))
        back, _ = roundtrip(w)
        assert back.bitwise_equal(w)
        assert back.paths() == w.paths()

    def test_save_load_save_identical_bytes(self, rng):
        w = NamedWeights()
        w.add("a", rng.normal(size=(3, 4)).astype(np.float32))
        w.add("b", rng.normal(size=(7,)).astype(np.float32))
        back, data = roundtrip(w)
        sink = io.BytesIO()
        save(back, sink)
        assert sink.getvalue() == data


class TestLoad:
    def test_bad_magic(self):
        with pytest.raises(BadMagicError, match="bad magic"):
            load(io.BytesIO(b"NOPE" + b"\x00" * 12))

    def test_unsupported_version(self):
        data = struct.pack("<4sIQ", b"SWPT", 9, 0)
        with pytest.raises(UnsupportedVersionError, match="version"):
            load(io.BytesIO(data))

    def test_truncated_payload_names_entry(self, rng):
        w = NamedWeights()
        w.add("trunk.weight", rng.normal(size=(4, 4)).astype(np.float32))
        sink = io.BytesIO()
        save(w, sink)
        clipped = sink.getvalue()[:-10]
        with pytest.raises(TruncatedError, match="trunk.weight"):
            load(io.BytesIO(clipped))

    def test_truncated_header(self):
        with pytest.raises(TruncatedError, match="header"):
            load(io.BytesIO(b"SW"))

    def test_duplicate_path_rejected_at_load(self):
        entry = (
            struct.pack("<H", 1)
            + b"x"
            + struct.pack("<B", 1)
            + struct.pack("<Q", 1)
            + struct.pack("<f", 0.5)
        )
        data = struct.pack("<4sIQ", b"SWPT", 1, 2) + entry + entry
        with pytest.raises(DuplicatePathError, match="duplicate"):
            load(io.BytesIO(data))

    def test_oversized_declared_dims_fail_without_allocation(self):
        # header declares a petabyte tensor; loading must fail on the short
        # read rather than try to materialize it
        data = (
            struct.pack("<4sIQ", b"SWPT", 1, 1)
            + struct.pack("<H", 1)
            + b"x"
            + struct.pack("<B", 1)
            + struct.pack("<Q", 1 << 48)
            + b"\x00" * 64
        )
        with pytest.raises(TruncatedError):
            load(io.BytesIO(data))


class TestNamedWeights:
    def test_duplicate_add_rejected(self):
        w = NamedWeights()
        w.add("p", np.ones(2, dtype=np.float32))
        with pytest.raises(DuplicatePathError):
            w.add("p", np.zeros(2, dtype=np.float32))

    def test_missing_path_names_it(self):
        with pytest.raises(KeyError, match="nope"):
            NamedWeights()["nope"]

    def test_order_preserved(self):
        w = NamedWeights()
        for name in ("z", "a", "m"):
            w.add(name, np.zeros(1, dtype=np.float32))
        assert w.paths() == ["z", "a", "m"]
        back, _ = roundtrip(w)
        assert back.paths() == ["z", "a", "m"]

    def test_checksum_stable_and_sensitive(self, rng):
        w = NamedWeights()
        w.add("a", rng.normal(size=(3,)).astype(np.float32))
        c1 = w.checksum()
        assert c1 == w.checksum()
        w2 = NamedWeights()
        w2.add("a", np.zeros(3, dtype=np.float32))
        assert w2.checksum() != c1


class TestFileHelpers:
    def test_save_file_load_file(self, tmp_path, rng):
        w = NamedWeights()
        w.add("k", rng.normal(size=(2, 2)).astype(np.float32))
        path = tmp_path / "w.swpt"
        save_file(w, path)
        assert load_file(path).bitwise_equal(w)
