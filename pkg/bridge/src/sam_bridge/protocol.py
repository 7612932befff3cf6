"""Wire types for the segmentation bridge.

One request carries one window as base64 row-major 8-bit samples; one
response carries either a mask list or an error string, never both. Masks
are {bbox: [x, y, w, h], pixel_count, rle?} with the run-length encoding
spanning the full window grid (alternating runs, background first).

Validation errors raise ProtocolError; servers turn those into error
responses rather than dying, clients turn them into rejections.
"""

from __future__ import annotations

import base64
import binascii
from dataclasses import dataclass, field

import numpy as np

UNKNOWN_ID = "unknown"


class ProtocolError(ValueError):
    """A message that violates the wire contract."""


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ProtocolError(message)


@dataclass
class BridgeRequest:
    id: str
    width: int
    height: int
    channels: int
    pixels_b64: str
    backend_options: dict = field(default_factory=dict)

    def validate(self) -> None:
        _require(isinstance(self.id, str) and self.id != "", "id must be a non-empty string")
        for name, value in (("width", self.width), ("height", self.height)):
            _require(isinstance(value, int) and value >= 1, f"{name} must be an integer >= 1")
        _require(self.channels in (1, 3), f"channels must be 1 or 3, got {self.channels!r}")
        _require(isinstance(self.backend_options, dict), "backend_options must be an object")
        raw = self.pixel_bytes()
        expected = self.width * self.height * self.channels
        _require(
            len(raw) == expected,
            f"pixel byte length {len(raw)} does not match width*height*channels={expected}",
        )

    def pixel_bytes(self) -> bytes:
        _require(isinstance(self.pixels_b64, str), "pixels_b64 must be a string")
        try:
            return base64.b64decode(self.pixels_b64, validate=True)
        except (binascii.Error, ValueError) as exc:
            raise ProtocolError(f"pixels_b64 is not valid base64: {exc}") from exc

    def pixels(self) -> np.ndarray:
        """Decoded window as (height, width) or (height, width, channels)."""
        flat = np.frombuffer(self.pixel_bytes(), dtype=np.uint8)
        if self.channels == 1:
            return flat.reshape(self.height, self.width)
        return flat.reshape(self.height, self.width, self.channels)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "width": self.width,
            "height": self.height,
            "channels": self.channels,
            "pixels_b64": self.pixels_b64,
            "backend_options": self.backend_options,
        }


def decode_request(raw) -> BridgeRequest:
    _require(isinstance(raw, dict), "request must be a JSON object")
    missing = {"id", "width", "height", "channels", "pixels_b64"} - set(raw)
    _require(not missing, f"request missing fields: {sorted(missing)}")
    request = BridgeRequest(
        id=raw["id"],
        width=raw["width"],
        height=raw["height"],
        channels=raw["channels"],
        pixels_b64=raw["pixels_b64"],
        backend_options=raw.get("backend_options") or {},
    )
    request.validate()
    return request


def validate_mask(mask, window_width: int, window_height: int) -> None:
    """Geometry invariants every outgoing mask must satisfy."""
    _require(isinstance(mask, dict), "mask must be an object")
    bbox = mask.get("bbox")
    _require(
        isinstance(bbox, (list, tuple)) and len(bbox) == 4
        and all(isinstance(v, int) for v in bbox),
        f"mask bbox must be four integers, got {bbox!r}",
    )
    x, y, w, h = bbox
    _require(w >= 1 and h >= 1 and x >= 0 and y >= 0, f"degenerate bbox {bbox}")
    _require(
        x + w <= window_width and y + h <= window_height,
        f"bbox {bbox} exceeds window {window_width}x{window_height}",
    )
    count = mask.get("pixel_count")
    _require(
        isinstance(count, int) and 1 <= count <= w * h,
        f"pixel_count {count!r} outside [1, {w * h}]",
    )
    rle = mask.get("rle")
    if rle is None:
        return
    _require(
        isinstance(rle, list) and all(isinstance(r, int) and r >= 0 for r in rle),
        "rle runs must be non-negative integers",
    )
    total = window_width * window_height
    _require(sum(rle) == total, f"rle runs sum to {sum(rle)}, window has {total}")
    decoded = rle_decode(rle, window_width, window_height)
    ys, xs = np.nonzero(decoded)
    _require(len(ys) == count, f"rle decodes to {len(ys)} pixels, pixel_count is {count}")
    if len(ys):
        _require(
            ys.min() >= y and xs.min() >= x and ys.max() < y + h and xs.max() < x + w,
            "rle foreground escapes the bbox",
        )


@dataclass
class BridgeResponse:
    id: str
    masks: list | None = None
    error: str | None = None
    model: str | None = None

    def validate(self, window_width: int | None = None, window_height: int | None = None) -> None:
        _require(isinstance(self.id, str) and self.id != "", "id must be a non-empty string")
        _require(
            (self.masks is None) != (self.error is None),
            "response must carry exactly one of masks/error",
        )
        if self.error is not None:
            _require(isinstance(self.error, str), "error must be a string")
            return
        _require(isinstance(self.masks, list), "masks must be a list")
        if window_width is not None and window_height is not None:
            for mask in self.masks:
                validate_mask(mask, window_width, window_height)

    def to_dict(self) -> dict:
        d: dict = {"id": self.id}
        if self.error is not None:
            d["error"] = self.error
        else:
            d["masks"] = self.masks
        if self.model is not None:
            d["model"] = self.model
        return d


def decode_response(raw) -> BridgeResponse:
    _require(isinstance(raw, dict), "response must be a JSON object")
    _require("id" in raw, "response missing id")
    response = BridgeResponse(
        id=raw["id"],
        masks=raw.get("masks"),
        error=raw.get("error"),
        model=raw.get("model"),
    )
    response.validate()
    return response


def rle_encode(mask: np.ndarray) -> list[int]:
    """Row-major alternating run lengths, background first (possibly 0)."""
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
    flat = np.zeros(width * height, dtype=bool)
    pos = 0
    fg = False
    for r in runs:
        if fg:
            flat[pos : pos + r] = True
        pos += r
        fg = not fg
    return flat.reshape(height, width)
