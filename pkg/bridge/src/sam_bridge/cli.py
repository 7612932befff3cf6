"""Entry point: pick a model and a transport, then serve until stopped.

Flags win over the BRIDGE_MODEL_PATH / BRIDGE_TRANSPORT / BRIDGE_PORT
environment variables, which win over defaults (stdio transport, port 8765).
"""

from __future__ import annotations

import argparse
import os
import sys

from .model import load_model
from .protocol import ProtocolError
from .server import make_http_server, serve_stdio

TRANSPORTS = ("stdio", "http")
DEFAULT_PORT = 8765


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sam-bridge",
        description="segmentation mask server speaking newline JSON or HTTP",
    )
    parser.add_argument(
        "--model",
        default=os.environ.get("BRIDGE_MODEL_PATH"),
        help="model file: threshold JSON or .pt/.pth checkpoint "
             "(default: $BRIDGE_MODEL_PATH)",
    )
    parser.add_argument(
        "--transport",
        choices=TRANSPORTS,
        default=os.environ.get("BRIDGE_TRANSPORT", "stdio"),
        help="stdio = newline JSON on stdin/stdout; http = POST /segment "
             "(default: $BRIDGE_TRANSPORT or stdio)",
    )
    parser.add_argument(
        "--port",
        type=int,
        default=int(os.environ.get("BRIDGE_PORT", DEFAULT_PORT)),
        help=f"http listen port (default: $BRIDGE_PORT or {DEFAULT_PORT})",
    )
    parser.add_argument("--host", default="127.0.0.1", help="http bind address")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.transport not in TRANSPORTS:
        print(f"error: transport must be one of {TRANSPORTS}", file=sys.stderr)
        return 1
    try:
        model = load_model(args.model)
    except ProtocolError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.transport == "stdio":
        serve_stdio(model)
        return 0
    server = make_http_server(model, args.host, args.port)
    print(
        f"serving {model.describe()} on http://{args.host}:{server.server_port}",
        file=sys.stderr,
    )
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
