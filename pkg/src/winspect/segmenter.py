"""Segmentation backends behind one dispatch surface.

Three backends produce the same record type:

* ``reference`` — deterministic threshold + connected components; the
  desk-scale stand-in for a neural mask generator.
* ``scripted`` — replays mask lists from a JSON fixture keyed by window
  identity (image id, origin row, origin col). Used by tests and for
  reproducing published confusion counts.
* ``external`` — client for a mask-generation service speaking the bridge
  wire protocol (see ``winspect.external``).

Masks returned by ``segment_window`` are canonically ordered by
(bbox_y, bbox_x, bbox_w, bbox_h) regardless of backend.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FixtureMiss, MaskInvariantError, ConfigError
from .kernels import component_stats, label_components
from .raster import WindowView

POLARITIES = ("dark_foreground", "light_foreground")
BACKENDS = ("reference", "scripted", "external")


def rle_encode(mask: np.ndarray) -> list[int]:
    """Row-major run lengths, alternating background/foreground.

    The first run counts background pixels (possibly 0); runs sum to the
    mask size.
    """
    flat = np.asarray(mask, dtype=bool).ravel()
    if flat.size == 0:
        return []
    changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], changes, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat[0]:
        runs.insert(0, 0)
    return runs


def rle_decode(runs: list[int], width: int, height: int) -> np.ndarray:
    """Inverse of :func:`rle_encode`; validates run totals and signs."""
    total = width * height
    if any((not isinstance(r, int)) or r < 0 for r in runs):
        raise ValueError("rle runs must be non-negative integers")
    if sum(runs) != total:
        raise ValueError(f"rle runs sum to {sum(runs)}, expected {total}")
    flat = np.zeros(total, dtype=bool)
    pos = 0
    fg = False
    for r in runs:
        if fg:
            flat[pos : pos + r] = True
        pos += r
        fg = not fg
    return flat.reshape(height, width)


@dataclass
class MaskRecord:
    """One segmented region in window coordinates: bounding box + pixel count.

    ``rle`` optionally carries the full binary mask as row-major alternating
    background/foreground run lengths over the window grid.
    """

    bbox_x: int
    bbox_y: int
    bbox_w: int
    bbox_h: int
    pixel_count: int
    rle: list[int] | None = None

    @property
    def bbox_area(self) -> int:
        return self.bbox_w * self.bbox_h

    def validate(self, window_width: int, window_height: int) -> None:
        if self.bbox_w < 1 or self.bbox_h < 1 or self.bbox_x < 0 or self.bbox_y < 0:
            raise MaskInvariantError(f"degenerate bbox {self.bbox()}")
        if self.bbox_x + self.bbox_w > window_width or self.bbox_y + self.bbox_h > window_height:
            raise MaskInvariantError(
                f"bbox {self.bbox()} exceeds window {window_width}x{window_height}"
            )
        if not 1 <= self.pixel_count <= self.bbox_area:
            raise MaskInvariantError(
                f"pixel_count {self.pixel_count} outside [1, {self.bbox_area}]"
            )
        if self.rle is not None:
            try:
                decoded = rle_decode(self.rle, window_width, window_height)
            except ValueError as e:
                raise MaskInvariantError(str(e)) from e
            ys, xs = np.nonzero(decoded)
            if len(ys) != self.pixel_count:
                raise MaskInvariantError(
                    f"rle decodes to {len(ys)} foreground pixels, pixel_count is {self.pixel_count}"
                )
            if len(ys) and (
                ys.min() < self.bbox_y
                or xs.min() < self.bbox_x
                or ys.max() >= self.bbox_y + self.bbox_h
                or xs.max() >= self.bbox_x + self.bbox_w
            ):
                raise MaskInvariantError("rle foreground escapes the bbox")

    def bbox(self) -> tuple[int, int, int, int]:
        return (self.bbox_x, self.bbox_y, self.bbox_w, self.bbox_h)

    def sort_key(self) -> tuple:
        return (self.bbox_y, self.bbox_x, self.bbox_w, self.bbox_h, self.pixel_count)

    def to_dict(self) -> dict:
        d = {"bbox": [self.bbox_x, self.bbox_y, self.bbox_w, self.bbox_h],
             "pixel_count": self.pixel_count}
        if self.rle is not None:
            d["rle"] = list(self.rle)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MaskRecord":
        try:
            x, y, w, h = d["bbox"]
            return cls(int(x), int(y), int(w), int(h), int(d["pixel_count"]),
                       list(d["rle"]) if d.get("rle") is not None else None)
        except (KeyError, TypeError, ValueError) as e:
            raise ValueError(f"malformed mask record {d!r}: {e}") from e


@dataclass
class SegmenterConfig:
    backend: str = "reference"
    threshold: int | str = 128
    polarity: str = "dark_foreground"
    connectivity: int = 8
    fixture_path: str | None = None
    endpoint: str | None = None
    backend_options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.polarity not in POLARITIES:
            raise ConfigError(f"unknown polarity {self.polarity!r}")
        if self.connectivity not in (4, 8):
            raise ConfigError(f"connectivity must be 4 or 8, got {self.connectivity!r}")
        if self.threshold != "otsu":
            t = self.threshold
            if not isinstance(t, int) or isinstance(t, bool) or not 0 <= t <= 255:
                raise ConfigError(f"threshold must be 0..255 or 'otsu', got {t!r}")
        if (self.fixture_path is None) == (self.backend == "scripted"):
            raise ConfigError("fixture_path is required iff backend is 'scripted'")
        if (self.endpoint is None) == (self.backend == "external"):
            raise ConfigError("endpoint is required iff backend is 'external'")


def otsu_threshold(gray: np.ndarray) -> int:
    """Between-class-variance-maximizing intensity split, ties toward lower t.

    Splits the histogram into {v <= t} and {v > t}. A window with a single
    distinct intensity returns that intensity, so strict-foreground rules
    yield an empty mask set for featureless windows.
    """
    hist = np.bincount(np.asarray(gray, dtype=np.uint8).ravel(), minlength=256).astype(np.float64)
    total = hist.sum()
    nonzero = np.flatnonzero(hist)
    if len(nonzero) == 1:
        return int(nonzero[0])
    levels = np.arange(256, dtype=np.float64)
    w_low = np.cumsum(hist)
    sum_low = np.cumsum(hist * levels)
    mu_total = sum_low[-1]
    w_high = total - w_low
    with np.errstate(divide="ignore", invalid="ignore"):
        mu_low = sum_low / w_low
        mu_high = (mu_total - sum_low) / w_high
        var_between = w_low * w_high * (mu_low - mu_high) ** 2
    var_between[~np.isfinite(var_between)] = -1.0
    return int(np.argmax(var_between))  # argmax takes the first (lowest) maximizer


def _foreground(gray: np.ndarray, threshold: int | str, polarity: str) -> np.ndarray:
    t = otsu_threshold(gray) if threshold == "otsu" else int(threshold)
    if polarity == "dark_foreground":
        return gray < t
    return gray > t


def reference_segment(
    window: WindowView | np.ndarray,
    threshold: int | str = 128,
    polarity: str = "dark_foreground",
    connectivity: int = 8,
    include_rle: bool = True,
) -> list[MaskRecord]:
    """Threshold + connected components, one MaskRecord per component.

    Foreground is strictly below (dark_foreground) or strictly above
    (light_foreground) the threshold. Output sorted by bbox keys.
    """
    gray = window.pixels if isinstance(window, WindowView) else np.asarray(window)
    if gray.ndim != 2:
        raise ValueError("reference segmenter requires a grayscale window")
    fg = _foreground(gray, threshold, polarity)
    labels, count = label_components(fg.astype(np.uint8), connectivity)
    if count == 0:
        return []
    min_y, min_x, max_y, max_x, pix = component_stats(labels, count)
    records = []
    for k in range(count):
        rle = rle_encode(labels == k + 1) if include_rle else None
        records.append(
            MaskRecord(
                bbox_x=int(min_x[k]),
                bbox_y=int(min_y[k]),
                bbox_w=int(max_x[k] - min_x[k] + 1),
                bbox_h=int(max_y[k] - min_y[k] + 1),
                pixel_count=int(pix[k]),
                rle=rle,
            )
        )
    records.sort(key=MaskRecord.sort_key)
    return records


def fixture_key(image_id: str, origin_row: int, origin_col: int) -> str:
    return f"{image_id}:{origin_row}:{origin_col}"


def load_fixture(path: str | Path) -> dict[str, list[MaskRecord]]:
    """Load a scripted-backend fixture: identity key -> mask list."""
    with open(path, "r", encoding="utf-8") as f:
        raw = json.load(f)
    if not isinstance(raw, dict):
        raise ValueError("fixture must be a JSON object keyed by imageId:row:col")
    return {key: [MaskRecord.from_dict(m) for m in masks] for key, masks in raw.items()}


def scripted_segment(
    fixture: dict[str, list[MaskRecord]],
    image_id: str,
    origin_row: int,
    origin_col: int,
) -> list[MaskRecord]:
    """Replay the fixture's mask list, verbatim, for one window identity."""
    key = fixture_key(image_id, origin_row, origin_col)
    if key not in fixture:
        raise FixtureMiss(f"no fixture entry for {key!r}")
    return list(fixture[key])


class Segmenter:
    """Configured segmentation backend; call :meth:`segment` per window."""

    def __init__(self, config: SegmenterConfig):
        self.config = config
        self._fixture = None
        self._client = None
        if config.backend == "scripted":
            self._fixture = load_fixture(config.fixture_path)
        elif config.backend == "external":
            from .external import BridgeClient

            self._client = BridgeClient(config.endpoint, config.backend_options)

    def segment(self, window: WindowView, image_id: str = "") -> list[MaskRecord]:
        cfg = self.config
        if cfg.backend == "reference":
            masks = reference_segment(
                window, cfg.threshold, cfg.polarity, cfg.connectivity
            )
        elif cfg.backend == "scripted":
            masks = scripted_segment(
                self._fixture, image_id, window.origin_row, window.origin_col
            )
            for m in masks:  # fail fast on fixtures that violate mask invariants
                m.validate(window.width, window.height)
        else:
            # the client validates replies and raises MalformedBackendReply
            masks = self._client.segment(window, image_id)
        return sorted(masks, key=MaskRecord.sort_key)

    def close(self):
        if self._client is not None:
            self._client.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def segment_window(
    window: WindowView, config: SegmenterConfig, image_id: str = ""
) -> list[MaskRecord]:
    """One-shot dispatch; builds the backend per call (batch paths should
    construct a :class:`Segmenter` once instead)."""
    with Segmenter(config) as seg:
        return seg.segment(window, image_id)
