"""mmbridge: produces EMB1 embedding files and serves the fetch exchange
protocol for the mmground engine. Communication is file- and stream-based
only; the bridge shares no in-process state with the engine.
"""

from .emb1 import read_records, write_records
from .encode import EncodeSummary, ManifestItem, encode_manifest, load_manifest
from .encoders import ClipEncoder, TinyJointEncoder, make_encoder
from .fetcher import (
    FetchServer,
    HttpBackend,
    ManifestBackend,
    handle_request_line,
    serve_stream,
)

__version__ = "0.1.0"

__all__ = [
    "ClipEncoder",
    "EncodeSummary",
    "FetchServer",
    "HttpBackend",
    "ManifestBackend",
    "ManifestItem",
    "TinyJointEncoder",
    "encode_manifest",
    "handle_request_line",
    "load_manifest",
    "make_encoder",
    "read_records",
    "serve_stream",
    "write_records",
]
