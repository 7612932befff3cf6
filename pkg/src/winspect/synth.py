"""Synthetic inspection corpus: bright textures with optional dark defects.

Textures stay above intensity 150 so a dark-foreground threshold of 128 sees
zero foreground on fault-free frames. Faulty frames subtract a fixed delta
inside one octagonal blob, landing every defect pixel well below 128 while
leaving the rest of the frame untouched. Blob placement is snapped so that
at least two window origins per axis fully contain the blob, which is what
makes the defect consistent across windows and therefore clusterable.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass

import numpy as np

from .analysis import AreaThresholds
from .errors import ConfigError
from .imgio import save_image
from .raster import ImageRaster, WindowSpec, window_origins

TEXTURES = ("flat", "stripes", "value_noise")

MANIFEST_NAME = "manifest.csv"
META_NAME = "meta.json"

_STRIPE_PERIOD = 16
_NOISE_LATTICE = 16


@dataclass(frozen=True)
class SynthSpec:
    image_size: int = 128
    count_per_class: int = 50
    texture: str = "value_noise"
    blob_min: int = 11
    blob_max: int = 16
    intensity_delta: int = 120
    seed: int = 0

    def __post_init__(self):
        if self.image_size < 1:
            raise ConfigError("image_size must be >= 1")
        if self.count_per_class < 0:
            raise ConfigError("count_per_class must be >= 0")
        if self.texture not in TEXTURES:
            raise ConfigError(f"texture must be one of {TEXTURES}, got {self.texture!r}")
        if not 3 <= self.blob_min <= self.blob_max:
            raise ConfigError("need 3 <= blob_min <= blob_max")
        if not 1 <= self.intensity_delta <= 255:
            raise ConfigError("intensity_delta must be in 1..255")


def _quantize(values: np.ndarray) -> np.ndarray:
    """Half-up rounding into uint8, clipped to the displayable range."""
    return np.clip(np.floor(values + 0.5), 0, 255).astype(np.uint8)


def _texture_flat(size: int, rng: np.random.Generator) -> np.ndarray:
    del rng
    return np.full((size, size), 190, dtype=np.uint8)


def _texture_stripes(size: int, rng: np.random.Generator) -> np.ndarray:
    phase = rng.uniform(0.0, 2.0 * math.pi)
    cols = np.arange(size, dtype=np.float64)
    row = 190.0 + 25.0 * np.sin(2.0 * math.pi * cols / _STRIPE_PERIOD + phase)
    return _quantize(np.tile(row, (size, 1)))


def _texture_value_noise(size: int, rng: np.random.Generator) -> np.ndarray:
    lat = _NOISE_LATTICE
    grid = size // lat + 2
    nodes = rng.random((grid, grid))
    idx = np.arange(size)
    cell = idx // lat
    frac = (idx % lat) / lat
    n00 = nodes[np.ix_(cell, cell)]
    n01 = nodes[np.ix_(cell, cell + 1)]
    n10 = nodes[np.ix_(cell + 1, cell)]
    n11 = nodes[np.ix_(cell + 1, cell + 1)]
    fy = frac[:, None]
    fx = frac[None, :]
    mixed = (
        n00 * (1 - fy) * (1 - fx)
        + n01 * (1 - fy) * fx
        + n10 * fy * (1 - fx)
        + n11 * fy * fx
    )
    return _quantize(155.0 + 80.0 * mixed)


_TEXTURE_FNS = {
    "flat": _texture_flat,
    "stripes": _texture_stripes,
    "value_noise": _texture_value_noise,
}


def blob_mask(width: int, height: int) -> np.ndarray:
    """Octagon filling a width x height box: corners cut by 45-degree bevels.

    The bevel leg is min(w,h)//4 (at least 1). Dimensions below 3 would cut
    away the extreme rows or columns, shrinking the bounding box, so they
    are rejected; at 3 and above the box is exactly width x height.
    """
    if width < 3 or height < 3:
        raise ValueError("blob dimensions must be >= 3")
    c = max(1, min(width, height) // 4)
    u = np.arange(width)[None, :]
    v = np.arange(height)[:, None]
    keep = (
        (u + v >= c)
        & ((width - 1 - u) + v >= c)
        & (u + (height - 1 - v) >= c)
        & ((width - 1 - u) + (height - 1 - v) >= c)
    )
    return keep


def blob_pixel_count(width: int, height: int) -> int:
    """Closed form for blob_mask's population: w*h - 2*c*(c+1)."""
    c = max(1, min(width, height) // 4)
    return width * height - 2 * c * (c + 1)


def _snapped_position(origins: list[int], window: int, step: int, blob: int,
                      rng: np.random.Generator) -> int:
    """Pick a blob origin fully covered by two consecutive window origins."""
    if len(origins) < 2:
        raise ConfigError(
            "image_size leaves fewer than two window origins on an axis"
        )
    first = origins[int(rng.integers(0, len(origins) - 1))]
    # Any position in [first+step, first+window-blob] sits inside the windows
    # at first and first+step simultaneously.
    lo = first + step
    hi = first + window - blob  # inclusive; non-empty because blob <= window-step
    return int(rng.integers(lo, hi + 1))


def generate_dataset(
    spec: SynthSpec,
    window_spec: WindowSpec,
    thresholds: AreaThresholds,
    out_dir: str | os.PathLike,
) -> str:
    """Write PNGs, manifest.csv, and meta.json; return the manifest path.

    Fault-free images come first in the manifest, then faulty ones, each
    class numbered from zero. Re-running with the same spec reproduces
    byte-identical files.
    """
    if not spec.blob_min * spec.blob_min > thresholds.lower:
        raise ConfigError(
            f"blob_min^2 = {spec.blob_min ** 2} must exceed lower threshold {thresholds.lower}"
        )
    if not spec.blob_max * spec.blob_max < thresholds.upper:
        raise ConfigError(
            f"blob_max^2 = {spec.blob_max ** 2} must stay under upper threshold {thresholds.upper}"
        )
    if spec.blob_max > window_spec.window_width - window_spec.width_step:
        raise ConfigError("blob_max must be <= window width minus step")
    if spec.blob_max > window_spec.window_height - window_spec.height_step:
        raise ConfigError("blob_max must be <= window height minus step")

    row_starts, col_starts = window_origins(
        spec.image_size, spec.image_size, window_spec
    )

    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    texture_fn = _TEXTURE_FNS[spec.texture]

    entries = []
    records = []
    for i in range(spec.count_per_class):
        pixels = texture_fn(spec.image_size, rng)
        name = f"fault_free_{i:04d}.png"
        save_image(ImageRaster(pixels=pixels), os.path.join(out_dir, name))
        entries.append((name, 0))
        records.append({"path": name, "label": 0, "texture": spec.texture, "blob": None})

    for i in range(spec.count_per_class):
        pixels = texture_fn(spec.image_size, rng).astype(np.int16)
        w = int(rng.integers(spec.blob_min, spec.blob_max + 1))
        h = int(rng.integers(spec.blob_min, spec.blob_max + 1))
        x0 = _snapped_position(
            col_starts, window_spec.window_width, window_spec.width_step, w, rng
        )
        y0 = _snapped_position(
            row_starts, window_spec.window_height, window_spec.height_step, h, rng
        )
        mask = blob_mask(w, h)
        region = pixels[y0 : y0 + h, x0 : x0 + w]
        region[mask] -= spec.intensity_delta
        pixels = np.clip(pixels, 0, 255).astype(np.uint8)
        name = f"faulty_{i:04d}.png"
        save_image(ImageRaster(pixels=pixels), os.path.join(out_dir, name))
        entries.append((name, 1))
        records.append(
            {
                "path": name,
                "label": 1,
                "texture": spec.texture,
                "blob": {
                    "x": x0,
                    "y": y0,
                    "w": w,
                    "h": h,
                    "pixel_count": blob_pixel_count(w, h),
                },
            }
        )

    manifest_path = os.path.join(out_dir, MANIFEST_NAME)
    with open(manifest_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["path", "label"])
        for path, label in entries:
            writer.writerow([path, label])

    with open(os.path.join(out_dir, META_NAME), "w") as fh:
        json.dump({"spec": asdict(spec), "images": records}, fh, indent=2)
        fh.write("\n")
    return manifest_path


def read_manifest(path: str | os.PathLike) -> list[tuple[str, int]]:
    """Parse `path,label` rows; relative paths are kept as written."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["path", "label"]:
            raise ConfigError(f"manifest header must be path,label, got {header!r}")
        entries = []
        for row in reader:
            if not row:
                continue
            if len(row) != 2:
                raise ConfigError(f"manifest row must have 2 fields, got {row!r}")
            p, raw = row
            if raw not in ("0", "1"):
                raise ConfigError(f"manifest label must be 0 or 1, got {raw!r}")
            entries.append((p, int(raw)))
    return entries
