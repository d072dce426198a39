"""Remote environmental model client.

Wire protocol: one JSON object per line, UTF-8, over either a subprocess's
stdio or a TCP socket.

  request   {"op": "score", "id": <u64>, "domain": "spatial"|"jpeg",
             "width": <u32>, "height": <u32>, "data": <base64>}
  response  {"id": <same u64>, "cover_confidence": <real in [0, 1]>}

The data field is the image plane as row-major little-endian float32.
A hello exchange identifies the server:

  request   {"op": "hello"}
  response  {"name": <string>, "domains": [<string>, ...]}

Every exchange enforces a timeout (default 30 s). A malformed response,
an id mismatch, or an out-of-range confidence raises ProtocolError and
aborts the embed; there is no silent retry.
"""

from __future__ import annotations

import base64
import json
import os
import select
import shlex
import socket
import subprocess

import numpy as np

from .environment import EnvScore
from .errors import ProtocolError
from .types import PixelMatrix

DEFAULT_TIMEOUT = 30.0


class _PipeChannel:
    """Line framing over a child process's stdin/stdout."""

    def __init__(self, proc: subprocess.Popen):
        self.proc = proc
        self.buf = b""

    def send_line(self, line: bytes) -> None:
        try:
            self.proc.stdin.write(line + b"\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, ValueError) as exc:
            raise ProtocolError(f"environment process closed its stdin: {exc}")

    def recv_line(self, timeout: float) -> bytes:
        fd = self.proc.stdout.fileno()
        while True:
            nl = self.buf.find(b"\n")
            if nl >= 0:
                line, self.buf = self.buf[:nl], self.buf[nl + 1 :]
                return line
            ready, _, _ = select.select([fd], [], [], timeout)
            if not ready:
                raise ProtocolError(
                    f"environment did not answer within {timeout:.0f} s"
                )
            chunk = os.read(fd, 65536)
            if not chunk:
                raise ProtocolError("environment closed its stdout mid-exchange")
            self.buf += chunk

    def close(self) -> None:
        if self.proc.poll() is None:
            try:
                self.proc.stdin.close()
            except OSError:
                pass
            try:
                self.proc.wait(timeout=5.0)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()


class _SocketChannel:
    """Line framing over a TCP connection."""

    def __init__(self, sock: socket.socket):
        self.sock = sock
        self.buf = b""

    def send_line(self, line: bytes) -> None:
        try:
            self.sock.sendall(line + b"\n")
        except OSError as exc:
            raise ProtocolError(f"environment connection failed: {exc}")

    def recv_line(self, timeout: float) -> bytes:
        self.sock.settimeout(timeout)
        while True:
            nl = self.buf.find(b"\n")
            if nl >= 0:
                line, self.buf = self.buf[:nl], self.buf[nl + 1 :]
                return line
            try:
                chunk = self.sock.recv(65536)
            except socket.timeout:
                raise ProtocolError(
                    f"environment did not answer within {timeout:.0f} s"
                )
            except OSError as exc:
                raise ProtocolError(f"environment connection failed: {exc}")
            if not chunk:
                raise ProtocolError("environment closed the connection mid-exchange")
            self.buf += chunk

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


def encode_plane(img: PixelMatrix) -> str:
    return base64.b64encode(img.data.astype("<f4").tobytes()).decode("ascii")


class RemoteEnvironment:
    """Scoring client over a line-delimited JSON channel."""

    def __init__(self, channel, timeout: float = DEFAULT_TIMEOUT):
        self._channel = channel
        self._timeout = timeout
        self._next_id = 0
        self.name = None
        self.domains = None

    @classmethod
    def spawn(cls, command: str | list, timeout: float = DEFAULT_TIMEOUT):
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        proc = subprocess.Popen(
            argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, bufsize=0
        )
        env = cls(_PipeChannel(proc), timeout)
        env.hello()
        return env

    @classmethod
    def connect(cls, host: str, port: int, timeout: float = DEFAULT_TIMEOUT):
        sock = socket.create_connection((host, port), timeout=timeout)
        env = cls(_SocketChannel(sock), timeout)
        env.hello()
        return env

    def _exchange(self, request: dict) -> dict:
        self._channel.send_line(json.dumps(request).encode("utf-8"))
        line = self._channel.recv_line(self._timeout)
        try:
            response = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ProtocolError(f"environment sent malformed JSON: {exc}")
        if not isinstance(response, dict):
            raise ProtocolError("environment response is not a JSON object")
        return response

    def hello(self) -> tuple[str, list]:
        response = self._exchange({"op": "hello"})
        name = response.get("name")
        domains = response.get("domains")
        if not isinstance(name, str) or not isinstance(domains, list):
            raise ProtocolError(
                f"malformed hello response: {json.dumps(response)[:200]}"
            )
        self.name = name
        self.domains = domains
        return name, domains

    def score(self, img: PixelMatrix) -> EnvScore:
        self._next_id += 1
        request = {
            "op": "score",
            "id": self._next_id,
            "domain": img.domain.value,
            "width": img.width,
            "height": img.height,
            "data": encode_plane(img),
        }
        response = self._exchange(request)
        if response.get("id") != self._next_id:
            raise ProtocolError(
                f"response id {response.get('id')!r} does not match "
                f"request id {self._next_id}"
            )
        conf = response.get("cover_confidence")
        if not isinstance(conf, (int, float)) or isinstance(conf, bool):
            raise ProtocolError("cover_confidence missing or not numeric")
        conf = float(conf)
        if not 0.0 <= conf <= 1.0 or conf != conf:
            raise ProtocolError(f"cover_confidence {conf} outside [0, 1]")
        return EnvScore(conf)

    def close(self) -> None:
        self._channel.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
