import numpy as np
import pytest

from winspect.errors import WindowLargerThanImage
from winspect.raster import (
    ImageRaster,
    WindowSpec,
    preprocess,
    split_image,
    window_origins,
)


def gray(h, w, fill=0):
    return ImageRaster(pixels=np.full((h, w), fill, dtype=np.uint8))


class TestWindowSpec:
    def test_valid(self):
        s = WindowSpec(4, 6, 2, 3)
        assert (s.window_width, s.window_height, s.width_step, s.height_step) == (4, 6, 2, 3)

    @pytest.mark.parametrize("bad", [0, -1])
    def test_rejects_nonpositive(self, bad):
        with pytest.raises(ValueError):
            WindowSpec(bad, 4, 2, 2)
        with pytest.raises(ValueError):
            WindowSpec(4, 4, bad, 2)

    def test_rejects_non_integers(self):
        with pytest.raises(ValueError):
            WindowSpec(4.5, 4, 2, 2)


class TestImageRaster:
    def test_grayscale_and_rgb(self):
        assert gray(3, 5).channels == 1
        rgb = ImageRaster(pixels=np.zeros((3, 5, 3), dtype=np.uint8))
        assert (rgb.height, rgb.width, rgb.channels) == (3, 5, 3)

    def test_rejects_bad_shapes(self):
        with pytest.raises(ValueError):
            ImageRaster(pixels=np.zeros((3, 5, 4), dtype=np.uint8))
        with pytest.raises(ValueError):
            ImageRaster(pixels=np.zeros((0, 5), dtype=np.uint8))
        with pytest.raises(ValueError):
            ImageRaster(pixels=np.zeros(7, dtype=np.uint8))

    def test_rejects_non_uint8(self):
        with pytest.raises(ValueError):
            ImageRaster(pixels=np.zeros((3, 3), dtype=np.float64))


class TestPreprocess:
    def test_grayscale_without_flag_is_same_object(self):
        img = gray(4, 4, 10)
        assert preprocess(img) is img

    def test_rgb_luma_primaries(self):
        px = np.zeros((1, 3, 3), dtype=np.uint8)
        px[0, 0] = (255, 0, 0)
        px[0, 1] = (0, 255, 0)
        px[0, 2] = (0, 0, 255)
        out = preprocess(ImageRaster(pixels=px))
        # 0.299*255=76.245 -> 76; 0.587*255=149.685 -> 150; 0.114*255=29.07 -> 29
        assert out.pixels.tolist() == [[76, 150, 29]]

    def test_luma_rounds_half_up(self):
        # 0.299*3 + 0.587*2 + 0.114*3 = 2.413 -> 2;  0.299*5 = 1.495 -> 1
        px = np.array([[[3, 2, 3], [5, 0, 0]]], dtype=np.uint8)
        out = preprocess(ImageRaster(pixels=px))
        assert out.pixels.tolist() == [[2, 1]]

    def test_normalize_rescales_full_range(self):
        px = np.array([[50, 100, 150]], dtype=np.uint8)
        out = preprocess(ImageRaster(pixels=px), normalize_brightness=True)
        # (100-50)*255/100 = 127.5, half-up -> 128
        assert out.pixels.tolist() == [[0, 128, 255]]

    def test_normalize_constant_image_unchanged(self):
        out = preprocess(gray(2, 2, 77), normalize_brightness=True)
        assert (out.pixels == 77).all()

    def test_normalize_idempotent_on_full_range(self):
        px = np.array([[0, 37, 255]], dtype=np.uint8)
        out = preprocess(ImageRaster(pixels=px), normalize_brightness=True)
        assert out.pixels.tolist() == [[0, 37, 255]]


class TestWindowOrigins:
    def test_ten_by_ten(self):
        rows, cols = window_origins(10, 10, WindowSpec(4, 4, 3, 3))
        assert rows == [0, 3, 6]
        assert cols == [0, 3, 6]

    def test_window_equals_image(self):
        rows, cols = window_origins(8, 8, WindowSpec(8, 8, 3, 3))
        assert rows == [0] and cols == [0]

    def test_oversized_window_raises(self):
        with pytest.raises(WindowLargerThanImage):
            window_origins(10, 10, WindowSpec(11, 4, 1, 1))
        with pytest.raises(WindowLargerThanImage):
            window_origins(10, 10, WindowSpec(4, 11, 1, 1))

    def test_edge_complete_appends_flush_origins(self):
        rows, cols = window_origins(10, 10, WindowSpec(4, 4, 4, 4), edge_complete=True)
        assert rows == [0, 4, 6]
        assert cols == [0, 4, 6]

    def test_edge_complete_no_duplicate_when_aligned(self):
        rows, _ = window_origins(12, 12, WindowSpec(4, 4, 4, 4), edge_complete=True)
        assert rows == [0, 4, 8]


class TestSplitImage:
    def test_reference_case_yields_49(self):
        ws = split_image(gray(512, 512), WindowSpec(128, 128, 64, 64))
        assert len(ws) == 49

    def test_row_major_order_and_origins(self):
        ws = split_image(gray(10, 10), WindowSpec(4, 4, 3, 3))
        assert [(w.origin_row, w.origin_col) for w in ws] == [
            (r, c) for r in (0, 3, 6) for c in (0, 3, 6)
        ]

    def test_window_pixels_match_source_slices(self):
        rng = np.random.default_rng(11)
        img = ImageRaster(pixels=rng.integers(0, 256, (20, 30), dtype=np.uint8))
        for w in split_image(img, WindowSpec(7, 5, 4, 6)):
            expected = img.pixels[w.origin_row : w.origin_row + 5,
                                  w.origin_col : w.origin_col + 7]
            assert np.array_equal(w.pixels, expected)

    def test_windows_are_copies(self):
        img = gray(8, 8, 9)
        w = split_image(img, WindowSpec(4, 4, 4, 4))[0]
        w.pixels[0, 0] = 200
        assert img.pixels[0, 0] == 9

    def test_count_matches_closed_form_random(self):
        rng = np.random.default_rng(23)
        for _ in range(50):
            h = int(rng.integers(1, 64))
            w = int(rng.integers(1, 64))
            wh = int(rng.integers(1, h + 1))
            ww = int(rng.integers(1, w + 1))
            hs = int(rng.integers(1, 16))
            ws_ = int(rng.integers(1, 16))
            got = len(split_image(gray(h, w), WindowSpec(ww, wh, ws_, hs)))
            assert got == ((h - wh) // hs + 1) * ((w - ww) // ws_ + 1)

    def test_edge_complete_covers_every_pixel(self):
        img = gray(10, 13)
        covered = np.zeros((10, 13), dtype=bool)
        for w in split_image(img, WindowSpec(4, 4, 3, 3), edge_complete=True):
            covered[w.origin_row : w.origin_row + 4, w.origin_col : w.origin_col + 4] = True
        assert covered.all()
