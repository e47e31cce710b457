"""Backend clients and servers over stdio frames and HTTP.

Stdio transport: each frame is a 4-byte big-endian length prefix followed
by the envelope bytes, one request in flight per subprocess. HTTP
transport: POST /inpaint with the JSON envelope, 200 on success, error
envelope with a 4xx/5xx status otherwise. Transport failures (timeouts,
dead subprocess, refused connection) raise TransportError and are
retriable; protocol violations raise ProtocolError.
"""

from __future__ import annotations

import logging
import queue
import shlex
import struct
import subprocess
import sys
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import BinaryIO, Callable, Optional

import requests

from . import protocol
from .errors import DecodeError, ProtocolError, TransportError
from .mock_backend import OracleConfig, mock_inpaint
from .protocol import BackendRequest, BackendResponse

logger = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 60.0

_LEN = struct.Struct(">I")
MAX_FRAME_BYTES = 256 * 1024 * 1024


def write_frame(stream: BinaryIO, payload: bytes) -> None:
    stream.write(_LEN.pack(len(payload)))
    stream.write(payload)
    stream.flush()


def read_frame(stream: BinaryIO) -> Optional[bytes]:
    """Read one frame; None on clean EOF at a frame boundary."""
    header = stream.read(_LEN.size)
    if not header:
        return None
    if len(header) < _LEN.size:
        raise TransportError(f"truncated frame header ({len(header)} of {_LEN.size} bytes)")
    (length,) = _LEN.unpack(header)
    if length > MAX_FRAME_BYTES:
        raise TransportError(f"frame of {length} bytes exceeds limit {MAX_FRAME_BYTES}")
    payload = b""
    while len(payload) < length:
        chunk = stream.read(length - len(payload))
        if not chunk:
            raise TransportError(f"truncated frame payload ({len(payload)} of {length} bytes)")
        payload += chunk
    return payload


class BackendClient:
    """One call() per request; responses are validated before return."""

    def call_raw(self, payload: bytes, timeout: float) -> bytes:
        raise NotImplementedError

    def call(self, req: BackendRequest, timeout: float = DEFAULT_TIMEOUT) -> BackendResponse:
        resp = protocol.decode_response(self.call_raw(protocol.encode_request(req), timeout))
        protocol.validate_response(req, resp)
        deviation = protocol.locality_deviation(req, resp)
        if deviation > protocol.LOCALITY_WARN_THRESHOLD:
            logger.warning(
                "backend modified pixels outside the mask (mean abs %.5f > %.5f)",
                deviation, protocol.LOCALITY_WARN_THRESHOLD,
            )
        return resp

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class MockBackend(BackendClient):
    def __init__(self, oracle: OracleConfig = OracleConfig()):
        self.oracle = oracle

    def call_raw(self, payload: bytes, timeout: float = DEFAULT_TIMEOUT) -> bytes:
        req = protocol.decode_request(payload)
        return protocol.encode_response(mock_inpaint(req, self.oracle))

    def call(self, req: BackendRequest, timeout: float = DEFAULT_TIMEOUT) -> BackendResponse:
        # Skip the wire for speed; mock_inpaint already quantizes to 16 bits.
        resp = mock_inpaint(req, self.oracle)
        protocol.validate_response(req, resp)
        return resp


class SubprocessBackend(BackendClient):
    """Spawn a backend process and exchange length-prefixed frames over stdio."""

    def __init__(self, command: list[str]):
        if not command:
            raise TransportError("empty backend command")
        self.command = command
        try:
            self.proc = subprocess.Popen(
                command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
            )
        except OSError as exc:
            raise TransportError(f"cannot start backend {command!r}: {exc}") from exc
        self._frames: queue.Queue = queue.Queue()
        self._lock = threading.Lock()
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def _read_loop(self) -> None:
        try:
            while True:
                frame = read_frame(self.proc.stdout)
                if frame is None:
                    self._frames.put(TransportError("backend closed its stdout"))
                    return
                self._frames.put(frame)
        except Exception as exc:  # surfaced on the caller's queue.get
            self._frames.put(TransportError(f"backend stream broke: {exc}"))

    def call_raw(self, payload: bytes, timeout: float = DEFAULT_TIMEOUT) -> bytes:
        with self._lock:  # one in-flight request per subprocess
            if self.proc.poll() is not None:
                raise TransportError(f"backend process exited with {self.proc.returncode}")
            try:
                write_frame(self.proc.stdin, payload)
            except (BrokenPipeError, OSError) as exc:
                raise TransportError(f"backend stdin broke: {exc}") from exc
            try:
                frame = self._frames.get(timeout=timeout)
            except queue.Empty:
                self.close()
                raise TransportError(f"backend did not answer within {timeout} s") from None
            if isinstance(frame, Exception):
                raise frame
            return frame

    def close(self) -> None:
        if self.proc.poll() is None:
            self.proc.terminate()
            try:
                self.proc.wait(timeout=5)
            except subprocess.TimeoutExpired:  # pragma: no cover
                self.proc.kill()


class HttpBackend(BackendClient):
    def __init__(self, base_url: str):
        self.base_url = base_url.rstrip("/")
        self._session = requests.Session()

    def call_raw(self, payload: bytes, timeout: float = DEFAULT_TIMEOUT) -> bytes:
        try:
            resp = self._session.post(
                self.base_url + "/inpaint", data=payload,
                headers={"Content-Type": "application/json"}, timeout=timeout,
            )
        except requests.Timeout as exc:
            raise TransportError(f"backend did not answer within {timeout} s") from exc
        except requests.RequestException as exc:
            raise TransportError(f"HTTP transport failed: {exc}") from exc
        return resp.content

    def close(self) -> None:
        self._session.close()


def open_backend(endpoint: str, oracle: OracleConfig = OracleConfig()) -> BackendClient:
    """Resolve an endpoint spec: "mock", an http(s) URL, or a subprocess command."""
    if endpoint == "mock":
        return MockBackend(oracle)
    if endpoint.startswith(("http://", "https://")):
        return HttpBackend(endpoint)
    return SubprocessBackend(shlex.split(endpoint))


def call_backend(endpoint: str, req: BackendRequest,
                 timeout: float = DEFAULT_TIMEOUT) -> BackendResponse:
    """One-shot convenience: open, call, close."""
    with open_backend(endpoint) as client:
        return client.call(req, timeout)


Handler = Callable[[bytes], bytes]


def make_handler(oracle: OracleConfig) -> Handler:
    """Envelope-in/envelope-out mock service; never raises, always answers."""

    def handle(payload: bytes) -> bytes:
        request_id = None
        try:
            req = protocol.decode_request(payload)
            request_id = req.request_id
            return protocol.encode_response(mock_inpaint(req, oracle))
        except ProtocolError as exc:
            code = "decode_error" if isinstance(exc, DecodeError) else "protocol_error"
            return protocol.encode_error(request_id, code, str(exc))
        except Exception as exc:
            return protocol.encode_error(request_id, "internal", str(exc))

    return handle


def serve_stdio(handler: Handler, stdin: Optional[BinaryIO] = None,
                stdout: Optional[BinaryIO] = None) -> None:
    """Answer frames until EOF. Malformed requests get error envelopes."""
    stdin = stdin if stdin is not None else sys.stdin.buffer
    stdout = stdout if stdout is not None else sys.stdout.buffer
    while True:
        frame = read_frame(stdin)
        if frame is None:
            return
        write_frame(stdout, handler(frame))


class _HttpHandler(BaseHTTPRequestHandler):
    server: "BackendHTTPServer"

    def log_message(self, *args):  # quiet; the caller owns logging
        pass

    def do_GET(self):
        if self.path == "/health":
            body = self.server.health_payload
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)
        else:
            self.send_error(404)

    def do_POST(self):
        if self.path != "/inpaint":
            self.send_error(404)
            return
        length = int(self.headers.get("Content-Length", 0))
        payload = self.rfile.read(length)
        body = self.server.handler(payload)
        # Envelopes are encoded with sorted keys, so errors start with {"error".
        status = 400 if body.startswith(b'{"error"') else 200
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


class BackendHTTPServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address: tuple[str, int], handler: Handler,
                 name: str = "mock", model_id: str = "mock"):
        super().__init__(address, _HttpHandler)
        self.handler = handler
        self.health_payload = (
            '{"name": "%s", "model_id": "%s"}' % (name, model_id)
        ).encode()


def serve_http(handler: Handler, port: int, host: str = "127.0.0.1") -> BackendHTTPServer:
    """Start a threaded HTTP server; caller runs serve_forever or uses it as a fixture."""
    return BackendHTTPServer((host, port), handler)
