"""Exchange-contract conformance: golden transcripts, fault handling, and a
live round-trip driven by the engine's protocol client.
"""

import io
import json
import subprocess
import sys
import threading

import pytest

from mmbridge import FetchServer, HttpBackend, ManifestBackend, handle_request_line, serve_stream

MANIFEST = """\
person relaxes\tw0\thttp://img/w0
person relaxes\tw1\thttp://img/w1
person relaxes\tw2\thttp://img/w2
a dog\td0\thttp://img/d0
"""

# One request line in, exactly one response line out.
GOLDEN_TRANSCRIPT = [
    (
        '{"query": "person relaxes", "max_results": 2}',
        '{"images": [{"image_id": "w0", "uri": "http://img/w0"},'
        ' {"image_id": "w1", "uri": "http://img/w1"}]}',
    ),
    (
        '{"query": "a dog", "max_results": 10}',
        '{"images": [{"image_id": "d0", "uri": "http://img/d0"}]}',
    ),
    (
        '{"query": "unknown thing", "max_results": 5}',
        '{"images": []}',
    ),
    (
        'this is not json',
        '{"error": "malformed request: Expecting value"}',
    ),
    (
        '{"max_results": 5}',
        '{"error": "request must be an object with \'query\'"}',
    ),
    (
        '{"query": "a dog", "max_results": 0}',
        '{"error": "max_results must be >= 1"}',
    ),
    (
        '{"query": "a dog", "max_results": 1}',
        '{"images": [{"image_id": "d0", "uri": "http://img/d0"}]}',
    ),
]


@pytest.fixture()
def backend():
    return ManifestBackend.from_file(io.StringIO(MANIFEST))


class TestGoldenTranscripts:
    def test_each_exchange_matches_golden(self, backend):
        for request, expected in GOLDEN_TRANSCRIPT:
            got = handle_request_line(request, backend)
            assert json.loads(got) == json.loads(expected), request

    def test_full_stream_transcript(self, backend):
        requests = "".join(req + "\n" for req, _ in GOLDEN_TRANSCRIPT)
        out = io.StringIO()
        handled = serve_stream(io.StringIO(requests), out, backend)
        assert handled == len(GOLDEN_TRANSCRIPT)
        responses = out.getvalue().splitlines()
        assert len(responses) == len(GOLDEN_TRANSCRIPT)
        for (_, expected), got in zip(GOLDEN_TRANSCRIPT, responses):
            assert json.loads(got) == json.loads(expected)

    def test_connection_usable_after_malformed_request(self, backend):
        requests = "garbage\n{\"query\": \"a dog\", \"max_results\": 3}\n"
        out = io.StringIO()
        serve_stream(io.StringIO(requests), out, backend)
        first, second = out.getvalue().splitlines()
        assert "error" in json.loads(first)
        assert json.loads(second)["images"][0]["image_id"] == "d0"

    def test_max_results_bound(self, backend):
        for n in (1, 2, 3):
            got = json.loads(handle_request_line(
                json.dumps({"query": "person relaxes", "max_results": n}), backend))
            assert len(got["images"]) == min(n, 3)


class TestEngineClientAgainstBridgeProcess:
    """The engine's ExchangeClient drives a real bridge subprocess (stdio)."""

    def test_round_trip(self, tmp_path):
        mmground = pytest.importorskip("mmground")
        manifest = tmp_path / "fetch.tsv"
        manifest.write_text(MANIFEST)
        proc = subprocess.Popen(
            [sys.executable, "-m", "mmbridge.cli", "serve", "--backend", "manifest",
             "--manifest", str(manifest)],
            stdin=subprocess.PIPE, stdout=subprocess.PIPE,
        )
        try:
            client = mmground.ExchangeClient(proc.stdout, proc.stdin)
            images = client.fetch(mmground.WebQuery("person relaxes", max_results=2))
            assert [(i.image_id, i.uri) for i in images] == [
                ("w0", "http://img/w0"), ("w1", "http://img/w1")
            ]
            assert client.fetch(mmground.WebQuery("unknown thing")) == []
            # A malformed raw line draws an error record and leaves the
            # connection usable for the next client call.
            proc.stdin.write(b"garbage\n")
            proc.stdin.flush()
            error_line = json.loads(proc.stdout.readline())
            assert "error" in error_line
            assert [i.image_id for i in client.fetch(mmground.WebQuery("a dog"))] == ["d0"]
        finally:
            proc.stdin.close()
            proc.wait(timeout=10)

    def test_tcp_server(self, tmp_path):
        mmground = pytest.importorskip("mmground")
        backend = ManifestBackend.from_file(io.StringIO(MANIFEST))
        server = FetchServer(("127.0.0.1", 0), backend)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        try:
            import socket

            with socket.create_connection(server.server_address) as sock:
                reader = sock.makefile("rb")
                writer = sock.makefile("wb")
                client = mmground.ExchangeClient(reader, writer)
                images = client.fetch(mmground.WebQuery("a dog"))
                assert [i.image_id for i in images] == ["d0"]
        finally:
            server.shutdown()
            server.server_close()


class TestHttpBackend:
    def test_live_lookup_against_local_http(self):
        import http.server

        class Stub(http.server.BaseHTTPRequestHandler):
            def do_GET(self):
                from urllib.parse import parse_qs, urlparse

                params = parse_qs(urlparse(self.path).query)
                n = int(params["n"][0])
                images = [{"image_id": f"h{i}", "uri": f"http://live/{i}"}
                          for i in range(5)][:n]
                payload = json.dumps({"images": images}).encode()
                self.send_response(200)
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def log_message(self, *args):
                pass

        server = http.server.ThreadingHTTPServer(("127.0.0.1", 0), Stub)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        try:
            host, port = server.server_address
            backend = HttpBackend(f"http://{host}:{port}/search")
            hits = backend.lookup("anything", 3)
            assert [h["image_id"] for h in hits] == ["h0", "h1", "h2"]
        finally:
            server.shutdown()
            server.server_close()
