"""Mask generators the bridge can serve.

Two kinds of model file are recognized by load_model:

* A JSON document with {"type": "threshold", ...} configures the built-in
  deterministic generator (global threshold + connected components). It
  exists so the bridge can run, and be tested end to end, on machines with
  no ML stack at all.
* A .pt/.pth checkpoint loads a pretrained promptable segmentation model's
  automatic mask generator, imported lazily so the dependency stays
  optional.

Both expose generate(pixels, options) -> list of mask dicts and a describe()
string recorded in responses for provenance.
"""

from __future__ import annotations

import json
import os
from collections import deque

import numpy as np

from .protocol import ProtocolError, rle_encode

POLARITIES = ("dark", "light")


def to_gray(pixels: np.ndarray) -> np.ndarray:
    """BT.601 luma with half-up rounding; grayscale input passes through."""
    if pixels.ndim == 2:
        return pixels
    weights = np.array([0.299, 0.587, 0.114])
    luma = pixels.astype(np.float64) @ weights
    return np.floor(luma + 0.5).clip(0, 255).astype(np.uint8)


def _components(mask: np.ndarray, connectivity: int):
    """Yield one boolean array per connected component, first-seen order."""
    h, w = mask.shape
    if connectivity == 8:
        steps = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
    else:
        steps = [(-1, 0), (0, -1), (0, 1), (1, 0)]
    seen = np.zeros((h, w), dtype=bool)
    for y in range(h):
        for x in range(w):
            if not mask[y, x] or seen[y, x]:
                continue
            component = np.zeros((h, w), dtype=bool)
            queue = deque([(y, x)])
            seen[y, x] = True
            component[y, x] = True
            while queue:
                cy, cx = queue.popleft()
                for dy, dx in steps:
                    ny, nx = cy + dy, cx + dx
                    if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and not seen[ny, nx]:
                        seen[ny, nx] = True
                        component[ny, nx] = True
                        queue.append((ny, nx))
            yield component


class ThresholdModel:
    """Deterministic stand-in generator: threshold then connected components."""

    def __init__(self, path: str, config: dict):
        unknown = set(config) - {"type", "threshold", "polarity", "connectivity", "include_rle"}
        if unknown:
            raise ProtocolError(f"unknown threshold model keys: {sorted(unknown)}")
        self.path = path
        self.defaults = {
            "threshold": config.get("threshold", 128),
            "polarity": config.get("polarity", "dark"),
            "connectivity": config.get("connectivity", 8),
            "include_rle": config.get("include_rle", True),
        }
        self._check(self.defaults)

    @staticmethod
    def _check(opts: dict) -> None:
        threshold = opts["threshold"]
        if not isinstance(threshold, int) or not 0 <= threshold <= 255:
            raise ProtocolError(f"threshold must be an integer in 0..255, got {threshold!r}")
        if opts["polarity"] not in POLARITIES:
            raise ProtocolError(f"polarity must be one of {POLARITIES}, got {opts['polarity']!r}")
        if opts["connectivity"] not in (4, 8):
            raise ProtocolError(f"connectivity must be 4 or 8, got {opts['connectivity']!r}")

    def describe(self) -> str:
        return f"threshold:{os.path.basename(self.path)}"

    def generate(self, pixels: np.ndarray, options: dict) -> list[dict]:
        opts = dict(self.defaults)
        for key in self.defaults:
            if key in options:
                opts[key] = options[key]
        self._check(opts)
        gray = to_gray(pixels)
        if opts["polarity"] == "dark":
            foreground = gray < opts["threshold"]
        else:
            foreground = gray > opts["threshold"]
        masks = []
        for component in _components(foreground, opts["connectivity"]):
            ys, xs = np.nonzero(component)
            mask = {
                "bbox": [int(xs.min()), int(ys.min()),
                         int(xs.max() - xs.min() + 1), int(ys.max() - ys.min() + 1)],
                "pixel_count": int(len(ys)),
            }
            if opts["include_rle"]:
                mask["rle"] = rle_encode(component)
            masks.append(mask)
        return masks


class SamModel:
    """Automatic mask generation from a pretrained checkpoint.

    Imports torch and the segmentation package only when instantiated, so
    installations without the ML stack can still serve the threshold model.
    """

    VARIANTS = ("vit_b", "vit_l", "vit_h")

    def __init__(self, path: str, variant: str | None = None):
        try:
            import torch  # noqa: F401
            from segment_anything import (
                SamAutomaticMaskGenerator,
                sam_model_registry,
            )
        except ImportError as exc:
            raise ProtocolError(
                "checkpoint models need the segment-anything and torch packages "
                f"installed: {exc}"
            ) from exc
        if variant is None:
            variant = next(
                (v for v in self.VARIANTS if v in os.path.basename(path)), "vit_b"
            )
        self.path = path
        self.variant = variant
        sam = sam_model_registry[variant](checkpoint=path)
        self._generator_cls = SamAutomaticMaskGenerator
        self._sam = sam
        self._generators: dict[tuple, object] = {}

    def describe(self) -> str:
        return f"sam:{self.variant}:{os.path.basename(self.path)}"

    def generate(self, pixels: np.ndarray, options: dict) -> list[dict]:
        key = tuple(sorted(options.items()))
        if key not in self._generators:
            self._generators[key] = self._generator_cls(self._sam, **options)
        if pixels.ndim == 2:
            pixels = np.stack([pixels] * 3, axis=-1)
        masks = []
        for ann in self._generators[key].generate(pixels):
            x, y, w, h = (int(v) for v in ann["bbox"])
            masks.append({
                "bbox": [x, y, max(1, w), max(1, h)],
                "pixel_count": int(ann["area"]),
            })
        return masks


def load_model(path: str | None):
    if not path:
        raise ProtocolError(
            "no model path configured; set BRIDGE_MODEL_PATH or pass --model"
        )
    if not os.path.exists(path):
        raise ProtocolError(f"model path {path!r} does not exist")
    if path.endswith(".json"):
        with open(path) as fh:
            try:
                config = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ProtocolError(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(config, dict) or config.get("type") != "threshold":
            raise ProtocolError(f'{path}: JSON models need "type": "threshold"')
        return ThresholdModel(path, config)
    if path.endswith((".pt", ".pth")):
        return SamModel(path)
    raise ProtocolError(
        f"unrecognized model file {path!r}; expected .json, .pt, or .pth"
    )
