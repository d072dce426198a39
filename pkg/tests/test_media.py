"""File format round trips and rejection of malformed inputs."""

from __future__ import annotations

import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from mctsteg import media
from mctsteg.errors import DomainError, FormatError
from mctsteg.types import CostPair, Domain, ModificationMap, PixelMatrix, WET_COST

from conftest import pixel_matrix


class TestPgm:
    def test_read_known_bytes(self, tmp_path):
        # 2x2 binary PGM, pixels row-major 0, 128, 255, 7.
        blob = b"P5\n2 2\n255\n" + bytes([0, 128, 255, 7])
        p = tmp_path / "a.pgm"
        p.write_bytes(blob)
        img = media.read_pgm(p)
        assert img.domain is Domain.SPATIAL
        assert img.data.dtype == np.float64
        np.testing.assert_array_equal(img.data, [[0.0, 128.0], [255.0, 7.0]])

    def test_write_known_bytes(self, tmp_path):
        img = pixel_matrix([[0, 128], [255, 7]])
        p = tmp_path / "a.pgm"
        media.write_pgm(img, p)
        assert p.read_bytes() == b"P5\n2 2\n255\n" + bytes([0, 128, 255, 7])

    def test_single_pixel(self, tmp_path):
        p = tmp_path / "one.pgm"
        media.write_pgm(pixel_matrix([[42]]), p)
        img = media.read_pgm(p)
        np.testing.assert_array_equal(img.data, [[42.0]])

    def test_comment_lines_in_header(self, tmp_path):
        blob = b"P5\n# made by hand\n2 1\n# another\n255\n" + bytes([9, 10])
        p = tmp_path / "c.pgm"
        p.write_bytes(blob)
        np.testing.assert_array_equal(media.read_pgm(p).data, [[9.0, 10.0]])

    def test_ascii_pgm_rejected(self, tmp_path):
        p = tmp_path / "a.pgm"
        p.write_text("P2\n1 1\n255\n42\n")
        with pytest.raises(FormatError, match="P2"):
            media.read_pgm(p)

    def test_bad_magic_rejected(self, tmp_path):
        p = tmp_path / "a.pgm"
        p.write_bytes(b"P6\n1 1\n255\n\x00")
        with pytest.raises(FormatError, match="magic"):
            media.read_pgm(p)

    def test_truncated_payload_rejected(self, tmp_path):
        p = tmp_path / "a.pgm"
        p.write_bytes(b"P5\n2 2\n255\n" + bytes([1, 2, 3]))
        with pytest.raises(FormatError, match="truncated"):
            media.read_pgm(p)

    def test_trailing_bytes_rejected(self, tmp_path):
        p = tmp_path / "a.pgm"
        p.write_bytes(b"P5\n1 1\n255\n" + bytes([1, 2]))
        with pytest.raises(FormatError, match="trailing"):
            media.read_pgm(p)

    def test_wide_maxval_rejected(self, tmp_path):
        p = tmp_path / "a.pgm"
        p.write_bytes(b"P5\n1 1\n65535\n\x00\x00")
        with pytest.raises(FormatError, match="maxval"):
            media.read_pgm(p)

    def test_value_above_maxval_rejected(self, tmp_path):
        p = tmp_path / "a.pgm"
        p.write_bytes(b"P5\n1 1\n100\n" + bytes([200]))
        with pytest.raises(FormatError, match="maxval"):
            media.read_pgm(p)

    def test_jpeg_domain_not_writable(self, tmp_path):
        img = PixelMatrix(np.array([[1.5, -3.0]]), Domain.JPEG)
        with pytest.raises(DomainError):
            media.write_pgm(img, tmp_path / "a.pgm")

    @given(
        hnp.arrays(
            np.uint8,
            hnp.array_shapes(min_dims=2, max_dims=2, min_side=1, max_side=16),
        )
    )
    def test_round_trip_any_image(self, arr):
        import tempfile
        from pathlib import Path

        img = PixelMatrix(arr.astype(np.float64), Domain.SPATIAL)
        with tempfile.TemporaryDirectory() as d:
            p = Path(d) / "x.pgm"
            media.write_pgm(img, p)
            back = media.read_pgm(p)
        np.testing.assert_array_equal(back.data, img.data)


class TestRawPlane:
    def test_round_trip_jpeg_values(self, tmp_path):
        img = PixelMatrix(np.array([[1.5, -300.25], [0.0, 1024.0]]), Domain.JPEG)
        p = tmp_path / "x.pixf1"
        media.write_raw_plane(img, p)
        back = media.read_raw_plane(p)
        assert back.domain is Domain.JPEG
        np.testing.assert_array_equal(back.data, img.data)

    def test_layout_is_little_endian_f32_row_major(self, tmp_path):
        img = PixelMatrix(np.array([[1.0, 2.0], [3.0, 4.0]]), Domain.JPEG)
        p = tmp_path / "x.pixf1"
        media.write_raw_plane(img, p)
        blob = p.read_bytes()
        assert blob[:5] == b"PIXF1"
        assert struct.unpack("<II", blob[5:13]) == (2, 2)
        assert blob[13:] == struct.pack("<4f", 1.0, 2.0, 3.0, 4.0)

    def test_nan_payload_rejected(self, tmp_path):
        blob = b"PIXF1" + struct.pack("<II", 1, 1) + struct.pack("<f", float("nan"))
        p = tmp_path / "x.pixf1"
        p.write_bytes(blob)
        with pytest.raises(FormatError, match="finite"):
            media.read_raw_plane(p)

    def test_truncated_rejected(self, tmp_path):
        blob = b"PIXF1" + struct.pack("<II", 2, 2) + struct.pack("<f", 1.0)
        p = tmp_path / "x.pixf1"
        p.write_bytes(blob)
        with pytest.raises(FormatError):
            media.read_raw_plane(p)

    def test_bad_magic_rejected(self, tmp_path):
        p = tmp_path / "x.pixf1"
        p.write_bytes(b"NOPE!" + struct.pack("<II", 1, 1) + struct.pack("<f", 0.0))
        with pytest.raises(FormatError):
            media.read_raw_plane(p)


class TestCostMap:
    def test_round_trip_exact_f32_values(self, tmp_path):
        # Every value here is exactly representable in float32, so the round
        # trip must be bit-exact, including the wet constant 1e13.
        plus = np.array([[0.5, 2.0], [WET_COST, 1.25]])
        minus = np.array([[4.0, WET_COST], [0.0, 8.0]])
        pair = CostPair(plus, minus)
        p = tmp_path / "c.cost1"
        media.write_cost_map(pair, p)
        back = media.read_cost_map(p)
        np.testing.assert_array_equal(back.rho_plus, plus)
        np.testing.assert_array_equal(back.rho_minus, minus)
        np.testing.assert_array_equal(back.wet_plus, [[False, False], [True, False]])
        np.testing.assert_array_equal(back.wet_minus, [[False, True], [False, False]])

    def test_negative_cost_rejected(self, tmp_path):
        blob = (
            b"COST1"
            + struct.pack("<II", 1, 1)
            + struct.pack("<f", -0.5)
            + struct.pack("<f", 1.0)
        )
        p = tmp_path / "c.cost1"
        p.write_bytes(blob)
        with pytest.raises(FormatError, match="negative"):
            media.read_cost_map(p)

    def test_trailing_bytes_rejected(self, tmp_path):
        blob = b"COST1" + struct.pack("<II", 1, 1) + struct.pack("<3f", 1.0, 2.0, 3.0)
        p = tmp_path / "c.cost1"
        p.write_bytes(blob)
        with pytest.raises(FormatError, match="trailing"):
            media.read_cost_map(p)

    @given(
        hnp.arrays(
            np.float32,
            (4, 3),
            elements=st.floats(0, 1e6, width=32, allow_nan=False),
        ),
        hnp.arrays(
            np.float32,
            (4, 3),
            elements=st.floats(0, 1e6, width=32, allow_nan=False),
        ),
    )
    def test_round_trip_any_pair(self, plus, minus):
        import tempfile
        from pathlib import Path

        pair = CostPair(plus.astype(np.float64), minus.astype(np.float64))
        with tempfile.TemporaryDirectory() as d:
            p = Path(d) / "c.cost1"
            media.write_cost_map(pair, p)
            back = media.read_cost_map(p)
        np.testing.assert_array_equal(back.rho_plus, pair.rho_plus)
        np.testing.assert_array_equal(back.rho_minus, pair.rho_minus)


class TestModificationMap:
    def test_round_trip(self, tmp_path):
        mods = ModificationMap(np.array([[1, 0], [-1, 1]]))
        p = tmp_path / "m.pixf1"
        media.write_modification_map(mods, p)
        back = media.read_modification_map(p)
        assert back.values.dtype == np.int8
        np.testing.assert_array_equal(back.values, mods.values)

    def test_non_ternary_rejected(self, tmp_path):
        blob = b"PIXF1" + struct.pack("<II", 1, 1) + struct.pack("<f", 2.0)
        p = tmp_path / "m.pixf1"
        p.write_bytes(blob)
        with pytest.raises(FormatError, match="ternary|-1"):
            media.read_modification_map(p)


class TestManifest:
    def test_round_trip_resolves_against_manifest_dir(self, tmp_path):
        sub = tmp_path / "covers"
        sub.mkdir()
        files = []
        for k in range(3):
            f = sub / f"c{k}.pgm"
            media.write_pgm(pixel_matrix([[k]]), f)
            files.append(f)
        man = sub / "manifest.txt"
        media.write_manifest(files, man)
        assert man.read_text() == "c0.pgm\nc1.pgm\nc2.pgm\n"
        back = media.read_manifest(man)
        assert back == files

    def test_blank_lines_skipped(self, tmp_path):
        man = tmp_path / "manifest.txt"
        man.write_text("a.pgm\n\n  \nb.pgm\n")
        back = media.read_manifest(man)
        assert [p.name for p in back] == ["a.pgm", "b.pgm"]

    def test_path_outside_manifest_dir_rejected(self, tmp_path):
        other = tmp_path / "elsewhere" / "x.pgm"
        man = tmp_path / "covers" / "manifest.txt"
        (tmp_path / "covers").mkdir()
        with pytest.raises(ValueError):
            media.write_manifest([other], man)
