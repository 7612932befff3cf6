import base64
import json
import os
import shlex
import socket
import sys
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from winspect.errors import BackendUnavailable, MalformedBackendReply
from winspect.external import BridgeClient, decode_response, encode_request
from winspect.raster import WindowView

BRIDGE = os.path.join(os.path.dirname(__file__), "fake_bridge.py")
STDIO_ENDPOINT = f"stdio:{shlex.quote(sys.executable)} {shlex.quote(BRIDGE)}"


def window(h=4, w=6, fill=7):
    return WindowView(origin_row=2, origin_col=3,
                      pixels=np.full((h, w), fill, dtype=np.uint8))


def stdio_client(mode, timeout=10.0):
    return BridgeClient(STDIO_ENDPOINT, backend_options={"mode": mode}, timeout=timeout)


class TestEncodeRequest:
    def test_fields_and_pixel_bytes(self):
        win = window()
        req = encode_request("img:2:3#0", win, {"model": "m"})
        assert req["id"] == "img:2:3#0"
        assert (req["width"], req["height"], req["channels"]) == (6, 4, 1)
        assert req["backend_options"] == {"model": "m"}
        raw = base64.b64decode(req["pixels_b64"])
        np.testing.assert_array_equal(
            np.frombuffer(raw, dtype=np.uint8).reshape(4, 6), win.pixels
        )

    def test_rgb_channels(self):
        win = WindowView(0, 0, np.zeros((2, 3, 3), dtype=np.uint8))
        req = encode_request("x#0", win, {})
        assert req["channels"] == 3
        assert len(base64.b64decode(req["pixels_b64"])) == 2 * 3 * 3


class TestDecodeResponse:
    OK = {"id": "r1", "masks": [{"bbox": [1, 0, 2, 3], "pixel_count": 4}]}

    def test_valid(self):
        masks = decode_response(dict(self.OK), "r1", width=6, height=4)
        assert len(masks) == 1
        assert masks[0].bbox() == (1, 0, 2, 3)

    def test_id_mismatch(self):
        with pytest.raises(MalformedBackendReply, match="does not match"):
            decode_response(dict(self.OK), "other", 6, 4)

    def test_error_reply(self):
        with pytest.raises(BackendUnavailable, match="boom"):
            decode_response({"id": "r1", "error": "boom"}, "r1", 6, 4)

    def test_masks_and_error_both_present(self):
        with pytest.raises(MalformedBackendReply, match="exactly one"):
            decode_response({"id": "r1", "masks": [], "error": "x"}, "r1", 6, 4)

    def test_neither_present(self):
        with pytest.raises(MalformedBackendReply, match="exactly one"):
            decode_response({"id": "r1"}, "r1", 6, 4)

    def test_masks_not_a_list(self):
        with pytest.raises(MalformedBackendReply, match="list"):
            decode_response({"id": "r1", "masks": {"a": 1}}, "r1", 6, 4)

    def test_mask_outside_window(self):
        bad = {"id": "r1", "masks": [{"bbox": [5, 0, 4, 1], "pixel_count": 2}]}
        with pytest.raises(MalformedBackendReply, match="invalid mask"):
            decode_response(bad, "r1", width=6, height=4)

    def test_mask_missing_fields(self):
        with pytest.raises(MalformedBackendReply):
            decode_response({"id": "r1", "masks": [{"bbox": [0, 0, 1, 1]}]}, "r1", 6, 4)

    def test_non_dict_reply(self):
        with pytest.raises(MalformedBackendReply):
            decode_response([1, 2], "r1", 6, 4)


class TestStdioTransport:
    def test_roundtrip(self):
        with stdio_client("ok") as client:
            masks = client.segment(window(), "img")
        assert len(masks) == 1
        assert masks[0].bbox() == (0, 0, 6, 4)
        assert masks[0].pixel_count == 24

    def test_empty_mask_list(self):
        with stdio_client("empty") as client:
            assert client.segment(window()) == []

    def test_sequential_requests_reuse_process(self):
        with stdio_client("ok") as client:
            for _ in range(5):
                assert len(client.segment(window())) == 1

    def test_error_reply(self):
        with stdio_client("error") as client:
            with pytest.raises(BackendUnavailable, match="model exploded"):
                client.segment(window())

    def test_invalid_mask_geometry(self):
        with stdio_client("bad-mask") as client:
            with pytest.raises(MalformedBackendReply, match="invalid mask"):
                client.segment(window())

    def test_masks_and_error_together(self):
        with stdio_client("both") as client:
            with pytest.raises(MalformedBackendReply, match="exactly one"):
                client.segment(window())

    def test_unknown_reply_id(self):
        with stdio_client("unknown-id") as client:
            with pytest.raises(MalformedBackendReply, match="matches no request"):
                client.segment(window())

    def test_non_json_line(self):
        with stdio_client("garbage") as client:
            with pytest.raises(MalformedBackendReply, match="not JSON"):
                client.segment(window())

    def test_timeout(self):
        with stdio_client("silent", timeout=0.3) as client:
            with pytest.raises(BackendUnavailable, match="within"):
                client.segment(window())

    def test_process_exit_mid_request(self):
        with stdio_client("exit") as client:
            with pytest.raises(BackendUnavailable, match="stdout"):
                client.segment(window())

    def test_fatal_state_sticks(self):
        with stdio_client("garbage") as client:
            with pytest.raises(MalformedBackendReply):
                client.segment(window())
            with pytest.raises(MalformedBackendReply):
                client.segment(window())

    def test_out_of_order_replies_pair_by_id(self):
        results = {}
        errors = []

        def run(name, size):
            try:
                results[name] = client.segment(
                    WindowView(0, 0, np.zeros((size, size), dtype=np.uint8)), name
                )
            except Exception as exc:  # surfaced after join
                errors.append(exc)

        with stdio_client("reverse") as client:
            threads = [
                threading.Thread(target=run, args=("a", 3)),
                threading.Thread(target=run, args=("b", 5)),
            ]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
        assert errors == []
        assert results["a"][0].bbox_w == 3
        assert results["b"][0].bbox_w == 5

    def test_empty_command(self):
        with pytest.raises(BackendUnavailable, match="empty command"):
            BridgeClient("stdio:   ")

    def test_unlaunchable_command(self):
        with pytest.raises(BackendUnavailable, match="cannot start"):
            BridgeClient("stdio:/nonexistent/binary-xyz")

    def test_bad_scheme(self):
        with pytest.raises(BackendUnavailable, match="endpoint"):
            BridgeClient("ftp://host/segment")


def _http_handler(behavior):
    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            if self.path != "/segment":
                self.send_error(404)
                return
            length = int(self.headers.get("Content-Length", 0))
            req = json.loads(self.rfile.read(length))
            mode = behavior["mode"]
            if mode == "http-500":
                self.send_error(500)
                return
            if mode == "not-json":
                body = b"plain text"
            else:
                rid = req["id"] + "-oops" if mode == "wrong-id" else req["id"]
                body = json.dumps({
                    "id": rid,
                    "masks": [{"bbox": [0, 0, req["width"], req["height"]],
                               "pixel_count": req["width"] * req["height"]}],
                }).encode()
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def log_message(self, *args):
            pass

    return Handler


@pytest.fixture
def http_bridge():
    behavior = {"mode": "ok"}
    server = ThreadingHTTPServer(("127.0.0.1", 0), _http_handler(behavior))
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"http://127.0.0.1:{server.server_port}", behavior
    finally:
        server.shutdown()
        thread.join()


class TestHttpTransport:
    def test_roundtrip(self, http_bridge):
        endpoint, _ = http_bridge
        with BridgeClient(endpoint) as client:
            masks = client.segment(window(), "img")
        assert masks[0].bbox() == (0, 0, 6, 4)

    def test_trailing_slash_normalized(self, http_bridge):
        endpoint, _ = http_bridge
        with BridgeClient(endpoint + "/") as client:
            assert len(client.segment(window())) == 1

    def test_non_200(self, http_bridge):
        endpoint, behavior = http_bridge
        behavior["mode"] = "http-500"
        with BridgeClient(endpoint) as client:
            with pytest.raises(BackendUnavailable, match="HTTP 500"):
                client.segment(window())

    def test_id_mismatch(self, http_bridge):
        endpoint, behavior = http_bridge
        behavior["mode"] = "wrong-id"
        with BridgeClient(endpoint) as client:
            with pytest.raises(MalformedBackendReply, match="does not match"):
                client.segment(window())

    def test_non_json_body(self, http_bridge):
        endpoint, behavior = http_bridge
        behavior["mode"] = "not-json"
        with BridgeClient(endpoint) as client:
            with pytest.raises(MalformedBackendReply, match="not JSON"):
                client.segment(window())

    def test_connection_refused(self):
        with socket.socket() as probe:
            probe.bind(("127.0.0.1", 0))
            port = probe.getsockname()[1]
        with BridgeClient(f"http://127.0.0.1:{port}", timeout=2.0) as client:
            with pytest.raises(BackendUnavailable, match="cannot reach"):
                client.segment(window())
