import numpy as np
import pytest

from pastnet.datagen.container import MAGIC, TrajectoryDataset, read_dataset, write_dataset
from pastnet.errors import (
    BadMagicError,
    MetadataError,
    TrailingBytesError,
    TruncatedPayloadError,
)


def make_dataset(seed=0, shape=(2, 4, 1, 8, 8)):
    rng = np.random.default_rng(seed)
    return TrajectoryDataset(
        data=rng.normal(size=shape).astype(np.float32),
        generator="test",
        params={"alpha": 1.5, "note": "roundtrip"},
        seed=seed,
        split="train",
    )


class TestRoundTrip:
    def test_bit_identical(self, tmp_path):
        ds = make_dataset()
        path = tmp_path / "data.pstj"
        write_dataset(ds, path)
        back = read_dataset(path)
        assert np.array_equal(back.data, ds.data)
        assert back.data.dtype == np.float32
        assert back.generator == ds.generator
        assert back.params == ds.params
        assert back.seed == ds.seed
        assert back.split == ds.split

    def test_file_bytes_reproducible(self, tmp_path):
        ds = make_dataset()
        p1, p2 = tmp_path / "a.pstj", tmp_path / "b.pstj"
        write_dataset(ds, p1)
        write_dataset(ds, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_layout(self, tmp_path):
        ds = make_dataset()
        path = tmp_path / "data.pstj"
        write_dataset(ds, path)
        blob = path.read_bytes()
        assert blob.startswith(MAGIC)
        header_end = blob.index(b"\n", len(MAGIC)) + 1
        payload = blob[header_end:]
        assert len(payload) == 4 * ds.data.size


class TestErrors:
    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.pstj"
        write_dataset(make_dataset(), path)
        blob = bytearray(path.read_bytes())
        blob[:5] = b"WRONG"
        path.write_bytes(bytes(blob))
        with pytest.raises(BadMagicError, match="magic"):
            read_dataset(path)

    def test_truncated_payload_cites_byte_counts(self, tmp_path):
        ds = make_dataset()
        path = tmp_path / "short.pstj"
        write_dataset(ds, path)
        blob = path.read_bytes()
        path.write_bytes(blob[:-17])
        expected = 4 * ds.data.size
        with pytest.raises(TruncatedPayloadError, match=rf"{expected}.*{expected - 17}"):
            read_dataset(path)

    def test_trailing_bytes_rejected(self, tmp_path):
        path = tmp_path / "long.pstj"
        write_dataset(make_dataset(), path)
        with open(path, "ab") as fh:
            fh.write(b"\x00" * 8)
        with pytest.raises(TrailingBytesError, match="trailing"):
            read_dataset(path)

    def test_malformed_metadata(self, tmp_path):
        path = tmp_path / "meta.pstj"
        path.write_bytes(MAGIC + b"{not json}\n" + b"\x00" * 4)
        with pytest.raises(MetadataError):
            read_dataset(path)

    def test_missing_field(self, tmp_path):
        path = tmp_path / "missing.pstj"
        path.write_bytes(MAGIC + b'{"generator": "x"}\n')
        with pytest.raises(MetadataError, match="params"):
            read_dataset(path)

    def test_non_finite_data_rejected(self, tmp_path):
        bad = np.zeros((1, 2, 1, 4, 4), dtype=np.float32)
        bad[0, 0, 0, 0, 0] = np.nan
        with pytest.raises(MetadataError, match="finite"):
            TrajectoryDataset(data=bad, generator="x")
        # a crafted file with a NaN payload is rejected on read as well
        path = tmp_path / "nan.pstj"
        write_dataset(make_dataset(shape=(1, 2, 1, 4, 4)), path)
        blob = bytearray(path.read_bytes())
        header_end = bytes(blob).index(b"\n", len(MAGIC)) + 1
        blob[header_end : header_end + 4] = np.float32(np.nan).tobytes()
        path.write_bytes(bytes(blob))
        with pytest.raises(MetadataError, match="finite"):
            read_dataset(path)
