"""Image raster type, minimal preprocessing, and moving-window extraction.

Windows are enumerated row-major over 0-based origins {0, step, 2*step, ...}
capped so every window lies fully inside the image. When (dimension - window)
is not a multiple of the step, the strip past the last origin is simply not
covered; pass ``edge_complete=True`` to append one extra row/column of windows
flush with the image border.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import WindowLargerThanImage


@dataclass(frozen=True)
class WindowSpec:
    """Window geometry and stride for moving-window extraction."""

    window_width: int
    window_height: int
    width_step: int
    height_step: int

    def __post_init__(self):
        for name in ("window_width", "window_height", "width_step", "height_step"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be an integer >= 1, got {v!r}")


@dataclass
class ImageRaster:
    """Decoded 8-bit pixel grid, shape (H, W) grayscale or (H, W, 3) RGB."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.dtype != np.uint8:
            raise ValueError(f"pixels must be uint8, got {px.dtype}")
        if px.ndim == 2:
            pass
        elif px.ndim == 3 and px.shape[2] == 3:
            pass
        else:
            raise ValueError(f"pixels must have shape (H, W) or (H, W, 3), got {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"image must be at least 1x1, got {px.shape}")
        self.pixels = px

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.pixels.ndim == 2 else 3


@dataclass
class WindowView:
    """One extracted sub-image; pixels are a copy, never a view of the source."""

    origin_row: int
    origin_col: int
    pixels: np.ndarray = field(repr=False)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


def _round_half_up(x: np.ndarray) -> np.ndarray:
    return np.floor(x + 0.5)


def preprocess(image: ImageRaster, normalize_brightness: bool = False) -> ImageRaster:
    """Convert to grayscale and optionally rescale intensities to the full range.

    3-channel input collapses to luma round(0.299 R + 0.587 G + 0.114 B),
    rounded half up. With ``normalize_brightness``, intensities are mapped
    linearly so min -> 0 and max -> 255 (constant images pass through).
    Grayscale input with the flag unset is returned unchanged.
    """
    px = image.pixels
    if px.ndim == 3:
        rgb = px.astype(np.float64)
        gray = _round_half_up(
            rgb[..., 0] * 0.299 + rgb[..., 1] * 0.587 + rgb[..., 2] * 0.114
        ).astype(np.uint8)
    else:
        if not normalize_brightness:
            return image
        gray = px

    if normalize_brightness:
        lo = int(gray.min())
        hi = int(gray.max())
        if hi > lo:
            # multiply before dividing so integer products stay exact
            scaled = (gray.astype(np.float64) - lo) * 255.0 / (hi - lo)
            gray = _round_half_up(scaled).astype(np.uint8)

    return ImageRaster(gray)


def window_origins(
    height: int, width: int, spec: WindowSpec, edge_complete: bool = False
) -> tuple[list[int], list[int]]:
    """0-based window origins per axis; independent of pixel content."""
    if spec.window_width > width or spec.window_height > height:
        raise WindowLargerThanImage(
            f"window {spec.window_width}x{spec.window_height} exceeds image {width}x{height}"
        )
    rows = list(range(0, height - spec.window_height + 1, spec.height_step))
    cols = list(range(0, width - spec.window_width + 1, spec.width_step))
    if edge_complete:
        last_row = height - spec.window_height
        last_col = width - spec.window_width
        if rows[-1] != last_row:
            rows.append(last_row)
        if cols[-1] != last_col:
            cols.append(last_col)
    return rows, cols


def split_image(
    image: ImageRaster, spec: WindowSpec, edge_complete: bool = False
) -> list[WindowView]:
    """Extract every window row-major; each window copies its pixel block."""
    rows, cols = window_origins(image.height, image.width, spec, edge_complete)
    px = image.pixels
    wh, ww = spec.window_height, spec.window_width
    return [
        WindowView(r, c, px[r : r + wh, c : c + ww].copy())
        for r in rows
        for c in cols
    ]
