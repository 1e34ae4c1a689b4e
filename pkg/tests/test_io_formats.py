"""Tests for source ingestion and the IDX / PNG writers."""

import struct

import numpy as np
import pytest
from PIL import Image

from src.core.errors import IngestionError, SerializationError
from src.core.io_formats import (
    DirectorySource,
    MemorySource,
    class_from_folder,
    quantize,
    read_idx,
    read_source,
    write_idx_float,
    write_idx_labels,
    write_idx_u8,
    write_png_mask,
    write_png_preview,
)
from src.core.model import GrayImage


class TestSources:
    """Tests for reading NIST-style source trees."""

    @pytest.mark.parametrize("name,label", [("30", 0), ("39", 9), ("35", 5), ("41", None), ("zz", None)])
    def test_class_folders(self, name, label):
        assert class_from_folder(name) == label

    def test_directory_source_lists_sorted_ids(self, directory_source):
        ids = directory_source.ids_for_class(7)
        assert ids == ["37/hsf_0/hsf_0_00000.png", "37/hsf_0/hsf_0_00001.png"]
        image, label = directory_source.load(ids[1])
        assert label == 7
        assert (image.width, image.height) == (128, 128)

    def test_non_digit_folders_skipped(self, source_tree):
        letters = source_tree / "41" / "hsf_0"
        letters.mkdir(parents=True)
        Image.fromarray(np.zeros((128, 128), dtype=np.uint8)).save(letters / "a.png")
        source = DirectorySource(source_tree)
        assert sum(len(source.ids_for_class(c)) for c in range(10)) == 20

    def test_missing_root(self, tmp_path):
        with pytest.raises(IngestionError, match="missing"):
            DirectorySource(tmp_path / "missing")

    def test_listing(self, source_tree, tmp_path):
        listing = tmp_path / "listing.csv"
        listing.write_text("path,label\n33/hsf_0/hsf_0_00001.png,3\n37/hsf_0/hsf_0_00000.png,12\n")
        source = DirectorySource(source_tree, listing)
        assert source.ids_for_class(3) == ["33/hsf_0/hsf_0_00001.png"]
        assert source.ids_for_class(7) == []

    def test_read_source_infers_label(self, source_tree):
        image, label = read_source(source_tree / "32" / "hsf_0" / "hsf_0_00000.png")
        assert label == 2
        assert image.values.max() == 220

    def test_unreadable_file(self, tmp_path):
        bad = tmp_path / "33" / "broken.png"
        bad.parent.mkdir()
        bad.write_bytes(b"not a png")
        with pytest.raises(IngestionError):
            read_source(bad)

    def test_unknown_memory_id(self):
        with pytest.raises(IngestionError):
            MemorySource({}).load("nope")


class TestIdx:
    """Tests for IDX containers."""

    def test_single_float_image_size_and_header(self, tmp_path):
        path = tmp_path / "one"
        write_idx_float(np.zeros((1, 32, 32)), path)
        raw = path.read_bytes()
        assert len(raw) == 4112
        assert raw[:4] == bytes([0, 0, 0x0D, 3])
        assert struct.unpack(">III", raw[4:16]) == (1, 32, 32)

    def test_empty_store(self, tmp_path):
        path = tmp_path / "empty"
        write_idx_float(np.zeros((0, 32, 32)), path)
        assert path.stat().st_size == 16
        assert read_idx(path).shape == (0, 32, 32)

    def test_float_payload_is_big_endian(self, tmp_path):
        images = np.zeros((1, 32, 32), dtype=np.float32)
        images[0, 0, 0] = 1.0
        images[0, 0, 1] = -2.5
        path = tmp_path / "golden"
        write_idx_float(images, path)
        raw = path.read_bytes()
        assert raw[16:24] == bytes.fromhex("3f800000c0200000")

    def test_float_round_trip_is_bit_exact(self, tmp_path):
        images = np.random.default_rng(3).normal(0, 32, (4, 32, 32)).astype(np.float32)
        path = tmp_path / "f"
        write_idx_float(images, path)
        back = read_idx(path)
        assert back.dtype == np.float32
        assert back.tobytes() == images.tobytes()

    def test_labels_file(self, tmp_path):
        path = tmp_path / "labels"
        write_idx_labels([3, 1, 4], path)
        assert path.read_bytes() == bytes([0, 0, 8, 1, 0, 0, 0, 3, 3, 1, 4])

    def test_u8_export_reads_as_mnist(self, tmp_path):
        """Parse the u8 file with a plain struct reader, independent of read_idx."""
        images = np.random.default_rng(4).normal(0, 32, (2, 32, 32))
        path = tmp_path / "u8"
        write_idx_u8(images, path, sigma=32.0)
        raw = path.read_bytes()
        magic, count, rows, cols = struct.unpack(">IIII", raw[:16])
        assert (magic, count, rows, cols) == (0x803, 2, 32, 32)
        pixels = np.frombuffer(raw[16:], dtype=np.uint8).reshape(count, rows, cols)
        assert np.array_equal(pixels, quantize(images, 32.0)[0])

    def test_wrong_image_shape(self, tmp_path):
        with pytest.raises(SerializationError):
            write_idx_float(np.zeros((1, 28, 28)), tmp_path / "x")

    @pytest.mark.parametrize(
        "payload",
        [b"", b"\x01\x00\x0d\x03", b"\x00\x00\x0d\x03\x00\x00\x00\x01", bytes([0, 0, 8, 1, 0, 0, 0, 3, 1])],
    )
    def test_malformed_files(self, tmp_path, payload):
        path = tmp_path / "bad"
        path.write_bytes(payload)
        with pytest.raises(SerializationError):
            read_idx(path)


class TestQuantize:
    """Tests for the lossy u8 mapping."""

    def test_mapping(self):
        values = np.array([0.0, 128.0, -128.0, 1000.0, -1000.0])
        data, clipped = quantize(values, sigma=32.0)
        assert data.tolist() == [128, 255, 1, 255, 0]
        assert clipped == 2

    def test_half_rounds_up(self):
        # 4 sigma = 127, so 0.5 maps to 128.5 exactly
        data, _ = quantize(np.array([0.5]), sigma=31.75)
        assert data.tolist() == [129]


class TestPng:
    """Tests for PNG panels."""

    def test_preview_is_8bit_gray(self, tmp_path):
        path = tmp_path / "p.png"
        write_png_preview(GrayImage(np.zeros((32, 32))), path)
        with Image.open(path) as img:
            assert img.mode == "L"
            assert img.size == (32, 32)
            assert np.asarray(img).max() == 128

    def test_mask_is_black_and_white(self, tmp_path):
        bits = np.zeros((32, 32), dtype=bool)
        bits[0, :] = True
        path = tmp_path / "m.png"
        write_png_mask(bits, path)
        with Image.open(path) as img:
            data = np.asarray(img)
        assert set(np.unique(data).tolist()) == {0, 255}
        assert (data[0] == 255).all()
