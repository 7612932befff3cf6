"""Segmentation mask server: JSON-over-stdio or HTTP in front of a model."""

from .model import SamModel, ThresholdModel, load_model
from .protocol import (
    UNKNOWN_ID,
    BridgeRequest,
    BridgeResponse,
    ProtocolError,
    decode_request,
    decode_response,
    rle_decode,
    rle_encode,
    validate_mask,
)
from .server import handle_line, handle_request, make_http_server, serve_stdio

__version__ = "0.1.0"

__all__ = [
    "BridgeRequest",
    "BridgeResponse",
    "ProtocolError",
    "SamModel",
    "ThresholdModel",
    "UNKNOWN_ID",
    "decode_request",
    "decode_response",
    "handle_line",
    "handle_request",
    "load_model",
    "make_http_server",
    "rle_decode",
    "rle_encode",
    "serve_stdio",
    "validate_mask",
]
