"""Line-delimited JSON scoring service.

One JSON object per line, UTF-8. Requests:

  {"op": "hello"}
  {"op": "score", "id": <u64>, "domain": "spatial"|"jpeg",
   "width": <u32>, "height": <u32>, "data": <base64 of row-major
   little-endian float32>}

Responses:

  {"name": <string>, "domains": [<string>, ...]}
  {"id": <u64>, "cover_confidence": <real in [0, 1]>}

A malformed request gets {"id": ..., "error": ...} (id null when the
request could not be parsed far enough to recover one) and the
connection stays open; only end-of-stream closes it. One request is
answered at a time per connection; multiple TCP connections each get
their own handler thread.

Backends: a constant scorer for plumbing tests, and a linear scorer
that loads the engine's model persistence format (versioned header,
dims, standardization vectors, weights, bias as little-endian float64)
and reproduces its score from the image plane alone.
"""

from __future__ import annotations

import argparse
import base64
import binascii
import json
import socketserver
import struct
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

_MODEL_MAGIC = b"ENVM1"
_TRUNCATION = 3
_AXIS_DIRECTIONS = ((0, 1), (0, -1), (1, 0), (-1, 0))
_DIAG_DIRECTIONS = ((1, 1), (-1, -1), (1, -1), (-1, 1))
_MAX_ID = 2**64 - 1
_MAX_SIDE = 1 << 16


def _direction_histogram(data: np.ndarray, di: int, dj: int) -> np.ndarray:
    """Joint distribution of truncated difference triples along (di, dj)."""
    h, w = data.shape
    r0, r1 = max(0, -di), h - max(0, di)
    c0, c1 = max(0, -dj), w - max(0, dj)
    diff = data[r0:r1, c0:c1] - data[r0 + di : r1 + di, c0 + dj : c1 + dj]
    t = _TRUNCATION
    diff = np.clip(diff, -t, t).astype(np.int64)

    hh, ww = diff.shape
    rr0, rr1 = max(0, -2 * di), hh - max(0, 2 * di)
    cc0, cc1 = max(0, -2 * dj), ww - max(0, 2 * dj)
    first = diff[rr0:rr1, cc0:cc1]
    second = diff[rr0 + di : rr1 + di, cc0 + dj : cc1 + dj]
    third = diff[rr0 + 2 * di : rr1 + 2 * di, cc0 + 2 * dj : cc1 + 2 * dj]
    if first.size == 0:
        raise ValueError("image too small for difference triples")

    span = 2 * t + 1
    codes = (first + t) * span * span + (second + t) * span + (third + t)
    hist = np.bincount(codes.ravel(), minlength=span**3).astype(np.float64)
    return hist / first.size


def extract_features(plane: np.ndarray) -> np.ndarray:
    """686-dim vector: pooled axis block then pooled diagonal block."""
    data = np.asarray(plane, dtype=np.float64)
    axis = np.mean(
        [_direction_histogram(data, di, dj) for di, dj in _AXIS_DIRECTIONS],
        axis=0,
    )
    diag = np.mean(
        [_direction_histogram(data, di, dj) for di, dj in _DIAG_DIRECTIONS],
        axis=0,
    )
    return np.concatenate([axis, diag])


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + np.exp(-z))
    e = np.exp(z)
    return e / (1.0 + e)


def load_model(path):
    """Read the versioned binary model file; returns (mean, scale, w, b)."""
    blob = Path(path).read_bytes()
    if blob[: len(_MODEL_MAGIC)] != _MODEL_MAGIC:
        raise ValueError(f"{path}: bad model magic")
    if len(blob) < len(_MODEL_MAGIC) + 4:
        raise ValueError(f"{path}: truncated model header")
    (dims,) = struct.unpack_from("<I", blob, len(_MODEL_MAGIC))
    expected = len(_MODEL_MAGIC) + 4 + dims * 8 * 3 + 8
    if len(blob) != expected:
        raise ValueError(
            f"{path}: model file holds {len(blob)} bytes, expected {expected}"
        )
    offset = len(_MODEL_MAGIC) + 4

    def take(count):
        nonlocal offset
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=offset)
        offset += count * 8
        return arr.astype(np.float64)

    mean = take(dims)
    scale = take(dims)
    weights = take(dims)
    (bias,) = struct.unpack_from("<d", blob, offset)
    return mean, scale, weights, float(bias)


@dataclass
class ConstantBackend:
    """Answers every score request with one configured confidence."""

    value: float
    domains: tuple = ("spatial", "jpeg")

    def __post_init__(self) -> None:
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"constant confidence {self.value} outside [0, 1]")

    def score(self, plane: np.ndarray) -> float:
        return self.value


@dataclass
class LinearBackend:
    """Standardizing logistic scorer over difference-triple features."""

    model_path: str
    domains: tuple = ("spatial",)
    _params: tuple = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._params = load_model(self.model_path)

    def score(self, plane: np.ndarray) -> float:
        mean, scale, weights, bias = self._params
        features = extract_features(plane)
        if features.size != weights.size:
            raise ValueError(
                f"model expects {weights.size} features, image yields "
                f"{features.size}"
            )
        z = (features - mean) / scale
        return _sigmoid(float(z @ weights + bias))


@dataclass
class ServerConfig:
    backend: object
    name: str = "env-server"


def _error(request_id, message: str) -> dict:
    return {"id": request_id, "error": message}


def _score_request(req: dict, backend) -> dict:
    request_id = req.get("id")
    if not isinstance(request_id, int) or isinstance(request_id, bool):
        return _error(None, "id must be an unsigned integer")
    if not 0 <= request_id <= _MAX_ID:
        return _error(None, f"id {request_id} outside unsigned 64-bit range")
    domain = req.get("domain")
    if domain not in backend.domains:
        return _error(
            request_id,
            f"domain {domain!r} not served (serving {list(backend.domains)})",
        )
    width = req.get("width")
    height = req.get("height")
    for label, value in (("width", width), ("height", height)):
        if not isinstance(value, int) or isinstance(value, bool):
            return _error(request_id, f"{label} must be an integer")
        if not 0 < value <= _MAX_SIDE:
            return _error(request_id, f"{label} {value} outside (0, {_MAX_SIDE}]")
    data = req.get("data")
    if not isinstance(data, str):
        return _error(request_id, "data must be a base64 string")
    try:
        raw = base64.b64decode(data, validate=True)
    except (binascii.Error, ValueError) as exc:
        return _error(request_id, f"data is not valid base64: {exc}")
    expected = width * height * 4
    if len(raw) != expected:
        return _error(
            request_id,
            f"data holds {len(raw)} bytes, expected {expected} "
            f"for {width}x{height} float32",
        )
    plane = np.frombuffer(raw, dtype="<f4").reshape(height, width)
    try:
        confidence = backend.score(plane)
    except ValueError as exc:
        return _error(request_id, str(exc))
    return {"id": request_id, "cover_confidence": float(confidence)}


def handle_line(line: bytes, config: ServerConfig) -> bytes:
    """One request line in, one response line out (no trailing newline)."""
    try:
        req = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        return _encode(_error(None, f"malformed JSON: {exc}"))
    if not isinstance(req, dict):
        return _encode(_error(None, "request must be a JSON object"))
    op = req.get("op")
    if op == "hello":
        return _encode(
            {"name": config.name, "domains": list(config.backend.domains)}
        )
    if op == "score":
        return _encode(_score_request(req, config.backend))
    request_id = req.get("id")
    if not isinstance(request_id, int) or isinstance(request_id, bool):
        request_id = None
    return _encode(_error(request_id, f"unknown op {op!r}"))


def _encode(response: dict) -> bytes:
    return json.dumps(response, separators=(",", ":")).encode("utf-8")


def serve_stdio(config: ServerConfig) -> None:
    stdin = sys.stdin.buffer
    stdout = sys.stdout.buffer
    for line in stdin:
        line = line.rstrip(b"\r\n")
        if not line:
            continue
        stdout.write(handle_line(line, config) + b"\n")
        stdout.flush()


class _ConnectionHandler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        config = self.server.config
        for line in self.rfile:
            line = line.rstrip(b"\r\n")
            if not line:
                continue
            self.wfile.write(handle_line(line, config) + b"\n")
            self.wfile.flush()


class _Server(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address, config: ServerConfig):
        super().__init__(address, _ConnectionHandler)
        self.config = config


def serve_tcp(config: ServerConfig, host: str, port: int) -> None:
    with _Server((host, port), config) as server:
        bound = server.server_address
        print(f"listening on {bound[0]}:{bound[1]}", file=sys.stderr, flush=True)
        server.serve_forever()


def make_backend(spec: str):
    kind, sep, arg = spec.partition(":")
    if kind == "constant" and sep:
        try:
            value = float(arg)
        except ValueError:
            raise ValueError(f"constant backend needs a number, got {arg!r}")
        return ConstantBackend(value)
    if kind == "linear" and sep:
        return LinearBackend(arg)
    raise ValueError(
        f"backend spec {spec!r} is not constant:<value> or linear:<path>"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="env-server",
        description="Serve image scores over the line-delimited JSON protocol.",
    )
    parser.add_argument(
        "--transport", choices=("stdio", "tcp"), default="stdio",
        help="stdio answers on standard streams; tcp listens on --host/--port",
    )
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=0,
                        help="0 picks a free port (printed to stderr)")
    parser.add_argument(
        "--backend", default="constant:0.5",
        help="constant:<value in [0,1]> or linear:<model file>",
    )
    parser.add_argument("--name", default="env-server",
                        help="server name reported in the hello response")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        backend = make_backend(args.backend)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    config = ServerConfig(backend, args.name)
    try:
        if args.transport == "stdio":
            serve_stdio(config)
        else:
            serve_tcp(config, args.host, args.port)
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    sys.exit(main())
