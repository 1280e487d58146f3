import json
import struct

import numpy as np
import pytest

from specsr.io import (
    export_matrix_csv,
    read_cube,
    read_dictionary,
    read_matrix_csv,
    read_srf,
    write_cube,
    write_dictionary,
)
from specsr.types import SpectralCube, SpectralDictionary, validate_cube

from conftest import random_cube


class TestCubeRoundTrip:
    def test_single_sample_raw_bytes(self, tmp_path):
        cube = SpectralCube(bands=1, rows=1, cols=1, data=[1.0])
        write_cube(cube, tmp_path / "one")
        raw = (tmp_path / "one.raw").read_bytes()
        assert raw == struct.pack("<d", 1.0)
        assert len(raw) == 8

    def test_f64_round_trip_bit_exact(self, tmp_path, rng):
        cube = random_cube(rng, 5, 4, 3)
        write_cube(cube, tmp_path / "c")
        back = read_cube(tmp_path / "c")
        assert back.data.tobytes() == cube.data.tobytes()
        assert back.shape == cube.shape
        assert validate_cube(back).ok

    def test_f32_round_trip_error_bound(self, tmp_path, rng):
        cube = random_cube(rng, 4, 8, 8)
        write_cube(cube, tmp_path / "c32", dtype="f32")
        back = read_cube(tmp_path / "c32")
        bound = 2.0**-24 * np.abs(cube.data)
        assert np.all(np.abs(back.data - cube.data) <= bound + 1e-300)

    def test_header_has_exact_keys(self, tmp_path, rng):
        cube = random_cube(rng, 2, 2, 2)
        write_cube(cube, tmp_path / "c", description="test cube")
        header = json.loads((tmp_path / "c.json").read_text())
        assert set(header) == {
            "bands", "rows", "cols", "dtype", "interleave", "byte_order", "description",
        }
        assert header["interleave"] == "bsq"
        assert header["byte_order"] == "little-endian"

    def test_invalid_cube_refused(self, tmp_path):
        bad = SpectralCube(bands=2, rows=2, cols=2, data=np.zeros(7))
        with pytest.raises(ValueError, match="invalid cube"):
            write_cube(bad, tmp_path / "bad")


class TestCubeCorruption:
    """Named errors for every corruption class."""

    @pytest.fixture
    def written(self, tmp_path, rng):
        cube = random_cube(rng, 2, 2, 2)
        write_cube(cube, tmp_path / "c")
        return tmp_path

    def test_truncated_raw(self, written):
        raw = written / "c.raw"
        raw.write_bytes(raw.read_bytes()[:-1])
        with pytest.raises(ValueError, match="length mismatch") as err:
            read_cube(written / "c")
        assert "63" in str(err.value) and "64" in str(err.value)

    def test_oversized_raw(self, written):
        raw = written / "c.raw"
        raw.write_bytes(raw.read_bytes() + b"\x00" * 8)
        with pytest.raises(ValueError, match="length mismatch"):
            read_cube(written / "c")

    def test_unknown_dtype(self, written):
        header = json.loads((written / "c.json").read_text())
        header["dtype"] = "f16"
        (written / "c.json").write_text(json.dumps(header))
        with pytest.raises(ValueError, match="dtype"):
            read_cube(written / "c")

    def test_unknown_header_key(self, written):
        header = json.loads((written / "c.json").read_text())
        header["compression"] = "zip"
        (written / "c.json").write_text(json.dumps(header))
        with pytest.raises(ValueError, match="compression"):
            read_cube(written / "c")

    def test_missing_header_field(self, written):
        header = json.loads((written / "c.json").read_text())
        del header["rows"]
        (written / "c.json").write_text(json.dumps(header))
        with pytest.raises(ValueError, match="rows"):
            read_cube(written / "c")

    def test_wrong_field_type(self, written):
        header = json.loads((written / "c.json").read_text())
        header["bands"] = "two"
        (written / "c.json").write_text(json.dumps(header))
        with pytest.raises(ValueError, match="bands"):
            read_cube(written / "c")

    def test_invalid_json(self, written):
        (written / "c.json").write_text("{not json")
        with pytest.raises(ValueError, match="JSON"):
            read_cube(written / "c")

    def test_missing_raw_file(self, written):
        (written / "c.raw").unlink()
        with pytest.raises(FileNotFoundError, match="c.raw"):
            read_cube(written / "c")

    def test_missing_header_file(self, written):
        (written / "c.json").unlink()
        with pytest.raises(FileNotFoundError, match="c.json"):
            read_cube(written / "c")

    def test_wrong_interleave(self, written):
        header = json.loads((written / "c.json").read_text())
        header["interleave"] = "bip"
        (written / "c.json").write_text(json.dumps(header))
        with pytest.raises(ValueError, match="interleave"):
            read_cube(written / "c")


class TestSrf:
    def test_basic_parse(self, tmp_path):
        path = tmp_path / "srf.csv"
        path.write_text("0.5,0.5,0,0\n0,0,0.5,0.5\n")
        srf = read_srf(path)
        assert srf.out_bands == 2 and srf.in_bands == 4
        assert srf.row_normalized
        assert np.array_equal(srf.weights[0], [0.5, 0.5, 0.0, 0.0])

    def test_comment_lines_skipped(self, tmp_path):
        path = tmp_path / "srf.csv"
        path.write_text("# a comment\n0.5,0.5,0,0\n# another\n0,0,0.5,0.5\n")
        assert read_srf(path).out_bands == 2

    def test_ragged_row_names_line(self, tmp_path):
        path = tmp_path / "srf.csv"
        path.write_text("0.5,0.5,0,0\n0,0,0.5\n")
        with pytest.raises(ValueError, match="line 2"):
            read_srf(path)

    def test_non_numeric_cell_names_position(self, tmp_path):
        path = tmp_path / "srf.csv"
        path.write_text("0.5,abc,0,0\n0,0,0.5,0.5\n")
        with pytest.raises(ValueError, match="line 1, column 1"):
            read_srf(path)

    def test_negative_weight_rejected(self, tmp_path):
        path = tmp_path / "srf.csv"
        path.write_text("0.5,-0.5,0,0\n0,0,0.5,0.5\n")
        with pytest.raises(ValueError, match="negative"):
            read_srf(path)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "srf.csv"
        path.write_text("# only comments\n")
        with pytest.raises(ValueError, match="no data rows"):
            read_srf(path)


class TestMatrixCsv:
    def test_identity_export(self, tmp_path):
        path = tmp_path / "m.csv"
        export_matrix_csv(np.eye(2), path)
        assert path.read_text() == "1,0\n0,1\n"

    def test_round_trip_bit_exact(self, tmp_path, rng):
        m = rng.standard_normal((7, 9)) * np.exp(rng.uniform(-30, 30, (7, 9)))
        path = tmp_path / "m.csv"
        export_matrix_csv(m, path)
        back = read_matrix_csv(path)
        assert back.tobytes() == m.tobytes()

    def test_empty_matrix_gives_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        export_matrix_csv(np.zeros((0, 0)), path)
        assert path.read_text() == ""
        assert read_matrix_csv(path).size == 0

    def test_nonfinite_refused(self, tmp_path):
        with pytest.raises(ValueError, match="non-finite"):
            export_matrix_csv(np.array([[np.inf]]), tmp_path / "x.csv")


class TestDictionaryRoundTrip:
    def test_bit_exact(self, tmp_path, rng):
        cols = rng.standard_normal((9, 5))
        cols /= np.linalg.norm(cols, axis=0)
        d = SpectralDictionary(columns=cols)
        write_dictionary(d, tmp_path / "d.csv")
        back = read_dictionary(tmp_path / "d.csv")
        assert back.columns.tobytes() == d.columns.tobytes()
