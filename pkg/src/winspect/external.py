"""Client for an out-of-process segmentation backend.

One window goes out as a JSON request carrying base64 pixel bytes; a JSON
reply comes back carrying masks or an error string. Two transports:

- "http://host:port" (or https): POST <endpoint>/segment per request.
- "stdio:<command>": spawn the command once, then newline-delimited JSON on
  its stdin/stdout. Replies may arrive out of order; pairing is by id, so
  callers on several threads can have requests in flight simultaneously.

Transport failures (unreachable endpoint, dead process, timeout, an error
reply) raise BackendUnavailable. Replies that are syntactically present but
violate the protocol (unknown id, bad mask geometry, masks and error both
set) raise MalformedBackendReply: the backend answered, but wrongly.
"""

from __future__ import annotations

import base64
import itertools
import json
import shlex
import subprocess
import threading

import numpy as np
import requests

from .errors import BackendUnavailable, MalformedBackendReply, MaskInvariantError
from .raster import WindowView
from .segmenter import MaskRecord

DEFAULT_TIMEOUT = 30.0


def encode_request(
    request_id: str, window: WindowView, backend_options: dict
) -> dict:
    pixels = np.ascontiguousarray(window.pixels)
    height, width = pixels.shape[:2]
    channels = 1 if pixels.ndim == 2 else pixels.shape[2]
    return {
        "id": request_id,
        "width": width,
        "height": height,
        "channels": channels,
        "pixels_b64": base64.b64encode(pixels.tobytes()).decode("ascii"),
        "backend_options": backend_options,
    }


def decode_response(raw: dict, expect_id: str, width: int, height: int) -> list[MaskRecord]:
    """Check the reply envelope and mask geometry, returning validated masks."""
    if not isinstance(raw, dict):
        raise MalformedBackendReply(f"reply must be a JSON object, got {type(raw).__name__}")
    if raw.get("id") != expect_id:
        raise MalformedBackendReply(
            f"reply id {raw.get('id')!r} does not match request id {expect_id!r}"
        )
    has_masks = raw.get("masks") is not None
    has_error = raw.get("error") is not None
    if has_masks == has_error:
        raise MalformedBackendReply("reply must carry exactly one of masks/error")
    if has_error:
        raise BackendUnavailable(f"backend error: {raw['error']}")
    if not isinstance(raw["masks"], list):
        raise MalformedBackendReply("masks must be a list")
    records = []
    for item in raw["masks"]:
        try:
            record = MaskRecord.from_dict(item)
            record.validate(width, height)
        except (MaskInvariantError, KeyError, TypeError, ValueError) as exc:
            raise MalformedBackendReply(f"invalid mask in reply: {exc}") from exc
        records.append(record)
    return records


class _Pending:
    __slots__ = ("event", "raw")

    def __init__(self):
        self.event = threading.Event()
        self.raw = None


class BridgeClient:
    """Holds one transport connection; safe for concurrent segment() calls."""

    def __init__(self, endpoint: str, backend_options: dict | None = None,
                 timeout: float = DEFAULT_TIMEOUT):
        self._options = dict(backend_options or {})
        self._timeout = timeout
        self._counter = itertools.count()
        self._lock = threading.Lock()
        self._pending: dict[str, _Pending] = {}
        self._fatal: Exception | None = None
        self._proc = None
        self._reader = None
        if endpoint.startswith(("http://", "https://")):
            self._url = endpoint.rstrip("/") + "/segment"
            self._mode = "http"
        elif endpoint.startswith("stdio:"):
            self._mode = "stdio"
            self._url = None
            command = endpoint[len("stdio:"):]
            if not command.strip():
                raise BackendUnavailable("stdio endpoint has an empty command")
            try:
                self._proc = subprocess.Popen(
                    shlex.split(command),
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                    text=True,
                    encoding="utf-8",
                    bufsize=1,
                )
            except OSError as exc:
                raise BackendUnavailable(f"cannot start bridge process: {exc}") from exc
            self._reader = threading.Thread(target=self._read_loop, daemon=True)
            self._reader.start()
        else:
            raise BackendUnavailable(
                f"endpoint must start with http://, https://, or stdio:, got {endpoint!r}"
            )

    def segment(self, window: WindowView, image_id: str = "") -> list[MaskRecord]:
        request_id = (
            f"{image_id}:{window.origin_row}:{window.origin_col}#{next(self._counter)}"
        )
        payload = encode_request(request_id, window, self._options)
        height, width = window.pixels.shape[:2]
        if self._mode == "http":
            raw = self._http_roundtrip(payload)
        else:
            raw = self._stdio_roundtrip(request_id, payload)
        return decode_response(raw, request_id, width, height)

    def _http_roundtrip(self, payload: dict) -> dict:
        try:
            resp = requests.post(self._url, json=payload, timeout=self._timeout)
        except requests.RequestException as exc:
            raise BackendUnavailable(f"cannot reach {self._url}: {exc}") from exc
        if resp.status_code != 200:
            raise BackendUnavailable(
                f"{self._url} answered HTTP {resp.status_code}"
            )
        try:
            return resp.json()
        except ValueError as exc:
            raise MalformedBackendReply(f"reply is not JSON: {exc}") from exc

    def _stdio_roundtrip(self, request_id: str, payload: dict) -> dict:
        slot = _Pending()
        with self._lock:
            if self._fatal is not None:
                raise type(self._fatal)(str(self._fatal))
            self._pending[request_id] = slot
            try:
                self._proc.stdin.write(json.dumps(payload) + "\n")
                self._proc.stdin.flush()
            except (OSError, ValueError) as exc:
                self._pending.pop(request_id, None)
                raise BackendUnavailable(f"bridge stdin closed: {exc}") from exc
        if not slot.event.wait(self._timeout):
            with self._lock:
                self._pending.pop(request_id, None)
            raise BackendUnavailable(f"no reply for {request_id} within {self._timeout}s")
        if isinstance(slot.raw, Exception):
            raise slot.raw
        return slot.raw

    def _read_loop(self):
        stream = self._proc.stdout
        while True:
            line = stream.readline()
            if not line:
                self._fail_all(BackendUnavailable("bridge process closed its stdout"))
                return
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                self._fail_all(MalformedBackendReply(f"reply is not JSON: {exc}"))
                return
            if not isinstance(raw, dict) or "id" not in raw:
                self._fail_all(MalformedBackendReply("reply lacks an id field"))
                return
            with self._lock:
                slot = self._pending.pop(raw["id"], None)
            if slot is None:
                self._fail_all(
                    MalformedBackendReply(f"reply id {raw['id']!r} matches no request")
                )
                return
            slot.raw = raw
            slot.event.set()

    def _fail_all(self, exc: Exception):
        with self._lock:
            self._fatal = exc
            pending = list(self._pending.values())
            self._pending.clear()
        for slot in pending:
            slot.raw = exc
            slot.event.set()

    def close(self):
        if self._proc is not None:
            try:
                if self._proc.stdin:
                    self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()
