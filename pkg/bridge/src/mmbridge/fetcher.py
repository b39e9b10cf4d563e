"""Fetch service speaking the engine's line-delimited exchange protocol.

Requests arrive one JSON object per line, {"query": ..., "max_results": ...};
each gets exactly one JSON line back: {"images": [{"image_id", "uri"}, ...]}
on success or {"error": ...} on a bad request. A malformed line never kills
the connection. Backends: a query->images manifest file, or a live HTTP
endpoint returning the same JSON image list.
"""

from __future__ import annotations

import json
import socketserver
import sys
import urllib.parse
import urllib.request
from typing import IO, Iterable, Protocol


class FetchBackend(Protocol):
    def lookup(self, query: str, max_results: int) -> list[dict[str, str]]: ...


class ManifestBackend:
    """Offline backend over query<TAB>image_id<TAB>uri rows."""

    def __init__(self, entries: dict[str, list[dict[str, str]]]):
        self.entries = entries

    @classmethod
    def from_file(cls, source: IO[str] | Iterable[str]) -> "ManifestBackend":
        entries: dict[str, list[dict[str, str]]] = {}
        for line_no, line in enumerate(source, start=1):
            stripped = line.rstrip("\n")
            if not stripped.strip() or stripped.startswith("#"):
                continue
            parts = stripped.split("\t")
            if len(parts) < 3:
                raise ValueError(f"manifest line {line_no}: expected query, id, uri")
            entries.setdefault(parts[0], []).append(
                {"image_id": parts[1], "uri": parts[2]}
            )
        return cls(entries)

    def lookup(self, query: str, max_results: int) -> list[dict[str, str]]:
        return list(self.entries.get(query, [])[:max_results])


class HttpBackend:
    """Live backend: GET <endpoint>?q=<query>&n=<max_results> -> JSON list.

    The service is expected to return either a bare JSON array of
    {image_id, uri} objects or an object with an "images" array.
    """

    def __init__(self, endpoint: str, timeout: float = 10.0):
        self.endpoint = endpoint
        self.timeout = timeout

    def lookup(self, query: str, max_results: int) -> list[dict[str, str]]:
        params = urllib.parse.urlencode({"q": query, "n": max_results})
        sep = "&" if "?" in self.endpoint else "?"
        url = f"{self.endpoint}{sep}{params}"
        with urllib.request.urlopen(url, timeout=self.timeout) as resp:
            payload = json.loads(resp.read().decode("utf-8"))
        images = payload.get("images") if isinstance(payload, dict) else payload
        if not isinstance(images, list):
            raise ValueError("live endpoint did not return an image list")
        out = []
        for item in images[:max_results]:
            out.append({"image_id": str(item["image_id"]), "uri": str(item.get("uri", ""))})
        return out


def handle_request_line(line: str, backend: FetchBackend) -> str:
    """One protocol exchange; always returns a single JSON line (no newline)."""
    try:
        request = json.loads(line)
    except json.JSONDecodeError as exc:
        return json.dumps({"error": f"malformed request: {exc.msg}"})
    if not isinstance(request, dict) or "query" not in request:
        return json.dumps({"error": "request must be an object with 'query'"})
    query = str(request["query"])
    try:
        max_results = int(request.get("max_results", 10))
    except (TypeError, ValueError):
        return json.dumps({"error": "max_results must be an integer"})
    if not query:
        return json.dumps({"error": "query must be non-empty"})
    if max_results < 1:
        return json.dumps({"error": "max_results must be >= 1"})
    try:
        images = backend.lookup(query, max_results)
    except Exception as exc:
        return json.dumps({"error": f"backend failure: {exc}"})
    return json.dumps({"images": images})


def serve_stream(reader: IO[str], writer: IO[str], backend: FetchBackend) -> int:
    """Serve until EOF; returns the number of requests handled."""
    handled = 0
    for line in reader:
        if not line.strip():
            continue
        writer.write(handle_request_line(line, backend) + "\n")
        writer.flush()
        handled += 1
    return handled


def serve_stdio(backend: FetchBackend) -> int:
    return serve_stream(sys.stdin, sys.stdout, backend)


class _LineHandler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        for raw in self.rfile:
            line = raw.decode("utf-8", errors="replace")
            if not line.strip():
                continue
            response = handle_request_line(line, self.server.backend)  # type: ignore[attr-defined]
            self.wfile.write(response.encode("utf-8") + b"\n")
            self.wfile.flush()


class FetchServer(socketserver.ThreadingTCPServer):
    """One request per line per connection; multiple connections allowed."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, addr: tuple[str, int], backend: FetchBackend):
        super().__init__(addr, _LineHandler)
        self.backend = backend


def serve_tcp(addr: str, backend: FetchBackend) -> None:
    host, _, port = addr.rpartition(":")
    server = FetchServer((host or "127.0.0.1", int(port)), backend)
    with server:
        server.serve_forever()
