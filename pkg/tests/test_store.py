import numpy as np
import pytest

from topoforge.store import (
    HEADER,
    Dataset,
    DatasetFormatError,
    DatasetHeader,
    DatasetWriter,
    Sample,
    export_text,
    import_text,
    read_sample,
    write_samples,
)


def random_sample(rng, nx=64, ny=64, seed=0):
    theta = rng.uniform(0, 2 * np.pi)
    return Sample(
        topology=(rng.uniform(0, 1, (ny, nx)) > 0.5).astype(np.float32),
        stress=rng.uniform(0, 10, (ny, nx)).astype(np.float32),
        strain=rng.uniform(0, 5, (ny, nx)).astype(np.float32),
        load_x=float(rng.uniform(0, 1)), load_y=float(rng.uniform(0, 1)),
        fx=float(np.cos(theta)), fy=float(np.sin(theta)),
        f=float(rng.uniform(0.3, 0.5)), seed=seed,
    )


class TestLayout:
    def test_header_is_28_bytes(self):
        assert HEADER.size == 28
        assert len(DatasetHeader(64, 64, 0).pack()) == 28

    def test_empty_file_is_header_only(self, tmp_path):
        path = str(tmp_path / "empty.tds")
        assert write_samples(path, []) == 0
        assert (tmp_path / "empty.tds").stat().st_size == 28

    def test_one_sample_file_size(self, tmp_path):
        rng = np.random.default_rng(0)
        path = str(tmp_path / "one.tds")
        write_samples(path, [random_sample(rng)])
        assert (tmp_path / "one.tds").stat().st_size == 28 + 49180

    def test_record_size_formula(self):
        assert DatasetHeader(64, 64, 0).record_size == 3 * 64 * 64 * 4 + 5 * 4 + 8
        assert DatasetHeader(16, 16, 0).record_size == 3 * 16 * 16 * 4 + 28


class TestRoundTrip:
    def test_fifty_random_samples_bitwise(self, tmp_path):
        rng = np.random.default_rng(1)
        samples = [random_sample(rng, seed=i) for i in range(50)]
        path = str(tmp_path / "rt.tds")
        assert write_samples(path, samples) == 50
        with Dataset(path) as ds:
            assert len(ds) == 50
            for i, original in enumerate(samples):
                got = ds.read(i)
                np.testing.assert_array_equal(got.topology, original.topology)
                np.testing.assert_array_equal(got.stress, original.stress)
                np.testing.assert_array_equal(got.strain, original.strain)
                for field in ("load_x", "load_y", "fx", "fy", "f"):
                    assert getattr(got, field) == np.float32(getattr(original, field))
                assert got.seed == original.seed

    def test_small_grid_roundtrip(self, tmp_path):
        rng = np.random.default_rng(2)
        path = str(tmp_path / "small.tds")
        write_samples(path, [random_sample(rng, nx=16, ny=16)], nx=16, ny=16)
        got = read_sample(path, 0)
        assert got.topology.shape == (16, 16)

    def test_deterministic_bytes(self, tmp_path):
        rng1 = np.random.default_rng(3)
        rng2 = np.random.default_rng(3)
        p1, p2 = str(tmp_path / "a.tds"), str(tmp_path / "b.tds")
        write_samples(p1, [random_sample(rng1, seed=7)])
        write_samples(p2, [random_sample(rng2, seed=7)])
        assert open(p1, "rb").read() == open(p2, "rb").read()


class TestErrors:
    def test_out_of_range_index(self, tmp_path):
        rng = np.random.default_rng(4)
        path = str(tmp_path / "x.tds")
        write_samples(path, [random_sample(rng)])
        with pytest.raises(IndexError):
            read_sample(path, 1)

    def test_truncated_file_is_reported(self, tmp_path):
        rng = np.random.default_rng(5)
        path = str(tmp_path / "t.tds")
        write_samples(path, [random_sample(rng)])
        raw = open(path, "rb").read()
        open(path, "wb").write(raw[:-100])
        with pytest.raises(DatasetFormatError):
            Dataset(path)

    def test_bad_magic(self, tmp_path):
        path = str(tmp_path / "bad.tds")
        open(path, "wb").write(b"NOTMAGIC" + b"\0" * 20)
        with pytest.raises(DatasetFormatError, match="magic"):
            Dataset(path)

    def test_nan_payload_rejected(self, tmp_path):
        rng = np.random.default_rng(6)
        sample = random_sample(rng)
        sample.stress[3, 3] = np.nan
        path = str(tmp_path / "nan.tds")
        with pytest.raises(DatasetFormatError, match="non-finite"):
            write_samples(path, [sample])

    def test_nonbinary_topology_rejected(self, tmp_path):
        rng = np.random.default_rng(7)
        sample = random_sample(rng)
        sample.topology[0, 0] = 0.5
        with pytest.raises(DatasetFormatError, match="binary"):
            write_samples(str(tmp_path / "nb.tds"), [sample])

    def test_corrupt_record_on_read(self, tmp_path):
        rng = np.random.default_rng(8)
        path = str(tmp_path / "c.tds")
        write_samples(path, [random_sample(rng)])
        with open(path, "r+b") as fh:
            fh.seek(28 + 100)
            fh.write(np.array([np.inf], dtype="<f4").tobytes())
        with pytest.raises(DatasetFormatError, match="record 0"):
            read_sample(path, 0)


class TestTextFormat:
    def test_export_import_roundtrip(self, tmp_path):
        rng = np.random.default_rng(9)
        sample = random_sample(rng, nx=8, ny=8, seed=42)
        path = str(tmp_path / "d.tds")
        write_samples(path, [sample], nx=8, ny=8)
        txt = str(tmp_path / "d.txt")
        export_text(path, 0, txt)
        back = import_text(txt)
        np.testing.assert_array_equal(back.topology, sample.topology)
        np.testing.assert_array_equal(back.stress, sample.stress)
        np.testing.assert_array_equal(back.strain, sample.strain)
        assert back.seed == 42
        assert back.f == np.float32(sample.f)
