"""Request handling and the two transports.

Every inbound message produces exactly one response and never kills the
process: unparseable input answers under id "unknown", a request that fails
validation or mask generation answers with an error field and the echoed id.
Responses also carry the model descriptor for provenance; clients that only
know id/masks/error ignore it.
"""

from __future__ import annotations

import json
import sys
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .protocol import (
    UNKNOWN_ID,
    BridgeResponse,
    ProtocolError,
    decode_request,
    validate_mask,
)


def _echo_id(raw) -> str:
    if isinstance(raw, dict):
        rid = raw.get("id")
        if isinstance(rid, str) and rid:
            return rid
    return UNKNOWN_ID


def handle_request(raw, model) -> BridgeResponse:
    """One message in, one response out; all failure paths return errors."""
    rid = _echo_id(raw)
    try:
        request = decode_request(raw)
    except ProtocolError as exc:
        return BridgeResponse(id=rid, error=str(exc), model=model.describe())
    try:
        masks = model.generate(request.pixels(), request.backend_options)
        for mask in masks:
            validate_mask(mask, request.width, request.height)
    except (ProtocolError, ValueError, TypeError, KeyError) as exc:
        return BridgeResponse(
            id=request.id, error=f"mask generation failed: {exc}",
            model=model.describe(),
        )
    return BridgeResponse(id=request.id, masks=masks, model=model.describe())


def handle_line(line: str, model) -> str:
    try:
        raw = json.loads(line)
    except json.JSONDecodeError as exc:
        response = BridgeResponse(
            id=UNKNOWN_ID, error=f"request is not JSON: {exc}",
            model=model.describe(),
        )
        return json.dumps(response.to_dict())
    return json.dumps(handle_request(raw, model).to_dict())


def serve_stdio(model, stdin=None, stdout=None) -> None:
    """Newline-delimited JSON until EOF; one response line per request line."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    for line in stdin:
        if not line.strip():
            continue
        stdout.write(handle_line(line, model) + "\n")
        stdout.flush()


def make_http_server(model, host: str, port: int) -> ThreadingHTTPServer:
    """Bound, unstarted server; callers run serve_forever (or a thread does)."""

    class Handler(BaseHTTPRequestHandler):
        def _send_json(self, payload: dict, status: int = 200) -> None:
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self):
            if self.path != "/healthz":
                self.send_error(404)
                return
            self._send_json({"status": "ok", "model": model.describe()})

        def do_POST(self):
            if self.path != "/segment":
                self.send_error(404)
                return
            length = int(self.headers.get("Content-Length", 0))
            body = self.rfile.read(length)
            try:
                raw = json.loads(body)
            except json.JSONDecodeError as exc:
                response = BridgeResponse(
                    id=UNKNOWN_ID, error=f"request is not JSON: {exc}",
                    model=model.describe(),
                )
                self._send_json(response.to_dict())
                return
            self._send_json(handle_request(raw, model).to_dict())

        def log_message(self, *args):
            pass

    return ThreadingHTTPServer((host, port), Handler)
