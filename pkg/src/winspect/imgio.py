"""Image file IO: 8-bit grayscale and RGB via PNG, PGM, and PPM.

Anything not 8-bit L or RGB after Pillow decoding is rejected rather than
silently converted, so a 16-bit scan or palette image fails loudly instead
of quietly losing precision.
"""

from __future__ import annotations

import os

import numpy as np
from PIL import Image

from .raster import ImageRaster

_EXTENSIONS = {".png", ".pgm", ".ppm"}


def load_image(path: str | os.PathLike) -> ImageRaster:
    with Image.open(path) as im:
        im.load()
        if im.mode == "I;16" or im.mode.startswith("I"):
            raise ValueError(f"{path}: 16-bit images are not supported")
        if im.mode == "P":
            raise ValueError(f"{path}: palette images are not supported")
        if im.mode not in ("L", "RGB"):
            raise ValueError(f"{path}: unsupported mode {im.mode!r}, need L or RGB")
        pixels = np.asarray(im, dtype=np.uint8)
    return ImageRaster(pixels=pixels)


def save_image(image: ImageRaster, path: str | os.PathLike) -> None:
    ext = os.path.splitext(os.fspath(path))[1].lower()
    if ext not in _EXTENSIONS:
        raise ValueError(f"unsupported extension {ext!r}, need one of {sorted(_EXTENSIONS)}")
    if ext == ".pgm" and image.channels != 1:
        raise ValueError("PGM holds grayscale only")
    if ext == ".ppm" and image.channels != 3:
        raise ValueError("PPM holds RGB only")
    mode = "L" if image.channels == 1 else "RGB"
    Image.fromarray(image.pixels, mode=mode).save(path)
