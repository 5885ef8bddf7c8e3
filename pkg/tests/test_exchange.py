import struct

import numpy as np
import pytest

from aeclab.errors import DataError
from aeclab.exchange import MAGIC, read_exchange, write_exchange


def random_streams(seed=0, n_frames=50, n_bins=257, labels=("Y", "E")):
    rng = np.random.default_rng(seed)
    return {
        label: (rng.standard_normal((n_frames, n_bins)) + 1j * rng.standard_normal((n_frames, n_bins))).astype(
            np.complex64
        )
        for label in labels
    }


class TestRoundTrip:
    def test_bit_exact(self, tmp_path):
        streams = random_streams(labels=("Y", "Dhat", "E"))
        path = tmp_path / "t.spxc"
        write_exchange(path, streams)
        back = read_exchange(path)
        assert back.labels == ("Y", "Dhat", "E")
        for label, arr in streams.items():
            assert np.array_equal(back.stream(label), arr)

    def test_payload_length_formula(self, tmp_path):
        streams = random_streams(n_frames=50, n_bins=257, labels=("Y", "E"))
        path = tmp_path / "t.spxc"
        write_exchange(path, streams)
        blob = path.read_bytes()
        header = 17 + sum(1 + len(l) for l in ("Y", "E"))
        assert len(blob) - header == 50 * 2 * 257 * 2 * 4

    def test_layout_flag(self, tmp_path):
        path = tmp_path / "t.spxc"
        write_exchange(path, random_streams(labels=("W",)), one_sided=False)
        assert read_exchange(path).one_sided is False

    def test_expected_streams_enforced(self, tmp_path):
        path = tmp_path / "t.spxc"
        write_exchange(path, random_streams(labels=("M",)))
        read_exchange(path, expected_streams=("M",))
        with pytest.raises(DataError, match="labels"):
            read_exchange(path, expected_streams=("Shat",))


class TestErrors:
    def test_unknown_magic(self, tmp_path):
        path = tmp_path / "bad.spxc"
        path.write_bytes(b"NOPE" + b"\x00" * 30)
        with pytest.raises(DataError, match="magic"):
            read_exchange(path)

    def test_unsupported_version(self, tmp_path):
        path = tmp_path / "v.spxc"
        write_exchange(path, random_streams(labels=("E",)))
        blob = bytearray(path.read_bytes())
        blob[4:6] = struct.pack("<H", 9999)
        path.write_bytes(bytes(blob))
        with pytest.raises(DataError, match="version 9999"):
            read_exchange(path)

    def test_truncated_payload_reports_offset(self, tmp_path):
        path = tmp_path / "t.spxc"
        write_exchange(path, random_streams(n_frames=10, n_bins=8, labels=("E",)))
        blob = path.read_bytes()
        path.write_bytes(blob[:-4])  # one float short
        expected_offset = 17 + 2
        with pytest.raises(DataError, match=f"offset {expected_offset}"):
            read_exchange(path)

    def test_unknown_label_rejected_on_write(self, tmp_path):
        with pytest.raises(DataError, match="unknown stream label"):
            write_exchange(tmp_path / "t.spxc", {"Q": np.zeros((2, 3), dtype=np.complex64)})

    def test_mismatched_shapes_rejected(self, tmp_path):
        streams = {
            "Y": np.zeros((2, 3), dtype=np.complex64),
            "E": np.zeros((2, 4), dtype=np.complex64),
        }
        with pytest.raises(DataError, match="shape"):
            write_exchange(tmp_path / "t.spxc", streams)

    def test_missing_stream_lookup(self, tmp_path):
        path = tmp_path / "t.spxc"
        write_exchange(path, random_streams(labels=("E",)))
        back = read_exchange(path)
        with pytest.raises(DataError, match="not present"):
            back.stream("M")


def test_header_layout_is_stable(tmp_path):
    # 4s magic, u16 version, u8 layout, u32 bins, u32 frames, u16 streams
    path = tmp_path / "t.spxc"
    data = np.arange(6, dtype=np.complex64).reshape(2, 3)
    write_exchange(path, {"E": data})
    blob = path.read_bytes()
    magic, version, layout, n_bins, n_frames, n_streams = struct.unpack_from("<4sHBIIH", blob, 0)
    assert magic == MAGIC
    assert (version, layout, n_bins, n_frames, n_streams) == (1, 0, 3, 2, 1)
    assert blob[17:19] == b"\x01E"
    floats = np.frombuffer(blob[19:], dtype="<f4")
    assert np.array_equal(floats[::2], np.arange(6, dtype=np.float32))
    assert np.array_equal(floats[1::2], np.zeros(6, dtype=np.float32))
