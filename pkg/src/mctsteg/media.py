"""Bit-exact file I/O: PGM images, cost maps, raw planes, manifests.

Formats:
  PGM     binary P5 only, maxval <= 255, one byte per pixel.
  COST1   magic b"COST1", u32le width, u32le height, then the plus plane
          followed by the minus plane as float32le row-major.
  PIXF1   magic b"PIXF1", u32le width, u32le height, one float32le
          row-major plane. Used for transform-domain images and for
          modification maps.
  manifest  newline-separated relative paths, UTF-8.

Readers validate and raise rather than clamp. Wet costs are decoded back
to the canonical float64 WET_COST: 1e13 is not representable in float32,
so any stored value at or above float32(1e13) means "wet".
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import DomainError, FormatError
from .types import WET_COST, CostPair, Domain, ModificationMap, PixelMatrix

_COST_MAGIC = b"COST1"
_RAW_MAGIC = b"PIXF1"
_WET_F32 = float(np.float32(WET_COST))
_MAX_SIDE = 1 << 20


class _TokenReader:
    """Whitespace/comment-aware tokenizer for the PGM header."""

    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def token(self) -> bytes:
        while self.pos < len(self.blob):
            c = self.blob[self.pos : self.pos + 1]
            if c == b"#":
                nl = self.blob.find(b"\n", self.pos)
                if nl < 0:
                    self.pos = len(self.blob)
                else:
                    self.pos = nl + 1
            elif c.isspace():
                self.pos += 1
            else:
                break
        start = self.pos
        while self.pos < len(self.blob) and not self.blob[
            self.pos : self.pos + 1
        ].isspace():
            self.pos += 1
        if start == self.pos:
            raise FormatError("malformed PGM header: unexpected end of file")
        return self.blob[start : self.pos]


def read_pgm(path) -> PixelMatrix:
    blob = Path(path).read_bytes()
    rd = _TokenReader(blob)
    magic = rd.token()
    if magic == b"P2":
        raise FormatError("ASCII PGM (P2) is not supported; use binary P5")
    if magic != b"P5":
        raise FormatError(f"malformed PGM header: bad magic {magic!r}")
    try:
        width = int(rd.token())
        height = int(rd.token())
        maxval = int(rd.token())
    except ValueError as exc:
        raise FormatError(f"malformed PGM header: non-numeric field ({exc})")
    if width <= 0 or height <= 0:
        raise FormatError("malformed PGM header: nonpositive dimensions")
    if maxval > 255:
        raise FormatError(f"PGM maxval {maxval} exceeds 255 (one byte per pixel)")
    if maxval <= 0:
        raise FormatError("malformed PGM header: nonpositive maxval")
    # Exactly one whitespace byte separates maxval from the payload.
    payload = blob[rd.pos + 1 :]
    expected = width * height
    if len(payload) < expected:
        raise FormatError(
            f"truncated PGM payload: expected {expected} bytes, found {len(payload)}"
        )
    if len(payload) > expected:
        raise FormatError(
            f"PGM payload has {len(payload) - expected} trailing bytes"
        )
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    if pixels.max(initial=0) > maxval:
        raise FormatError("PGM payload contains values above declared maxval")
    return PixelMatrix(pixels.astype(np.float64), Domain.SPATIAL)


def write_pgm(img: PixelMatrix, path) -> None:
    if img.domain is not Domain.SPATIAL:
        raise DomainError("only spatial images can be written as PGM")
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + img.data.astype(np.uint8).tobytes())


def _read_header(blob: bytes, magic: bytes, path) -> tuple[int, int]:
    if blob[: len(magic)] != magic:
        raise FormatError(f"{path}: bad magic, expected {magic.decode()}")
    if len(blob) < len(magic) + 8:
        raise FormatError(f"{path}: truncated header")
    width, height = struct.unpack_from("<II", blob, len(magic))
    if width == 0 or height == 0 or width > _MAX_SIDE or height > _MAX_SIDE:
        raise FormatError(f"{path}: implausible dimensions {width}x{height}")
    return width, height


def _read_plane(blob: bytes, offset: int, width: int, height: int, path) -> np.ndarray:
    nbytes = width * height * 4
    if len(blob) < offset + nbytes:
        raise FormatError(f"{path}: truncated plane data")
    plane = np.frombuffer(blob, dtype="<f4", count=width * height, offset=offset)
    return plane.reshape(height, width).astype(np.float64)


def read_cost_map(path) -> CostPair:
    blob = Path(path).read_bytes()
    width, height = _read_header(blob, _COST_MAGIC, path)
    nbytes = width * height * 4
    plus = _read_plane(blob, len(_COST_MAGIC) + 8, width, height, path)
    minus = _read_plane(blob, len(_COST_MAGIC) + 8 + nbytes, width, height, path)
    if len(blob) != len(_COST_MAGIC) + 8 + 2 * nbytes:
        raise FormatError(f"{path}: trailing bytes after cost planes")
    for name, plane in (("plus", plus), ("minus", minus)):
        if not np.all(np.isfinite(plane)):
            raise FormatError(f"{path}: {name} plane contains non-finite costs")
        if np.any(plane < 0):
            bad = float(plane[plane < 0].flat[0])
            raise FormatError(f"{path}: {name} plane contains negative cost {bad}")
        # Restore the canonical wet constant lost to float32 rounding.
        plane[plane >= _WET_F32] = WET_COST
    return CostPair(plus, minus)


def write_cost_map(pair: CostPair, path) -> None:
    header = _COST_MAGIC + struct.pack("<II", pair.width, pair.height)
    body = (
        pair.rho_plus.astype("<f4").tobytes()
        + pair.rho_minus.astype("<f4").tobytes()
    )
    Path(path).write_bytes(header + body)


def read_raw_plane(path, domain: Domain = Domain.JPEG) -> PixelMatrix:
    blob = Path(path).read_bytes()
    width, height = _read_header(blob, _RAW_MAGIC, path)
    plane = _read_plane(blob, len(_RAW_MAGIC) + 8, width, height, path)
    if len(blob) != len(_RAW_MAGIC) + 8 + width * height * 4:
        raise FormatError(f"{path}: trailing bytes after plane")
    if not np.all(np.isfinite(plane)):
        raise FormatError(f"{path}: plane contains non-finite values")
    return PixelMatrix(plane, domain)


def write_raw_plane(img: PixelMatrix, path) -> None:
    header = _RAW_MAGIC + struct.pack("<II", img.width, img.height)
    Path(path).write_bytes(header + img.data.astype("<f4").tobytes())


def read_modification_map(path) -> ModificationMap:
    blob = Path(path).read_bytes()
    width, height = _read_header(blob, _RAW_MAGIC, path)
    plane = _read_plane(blob, len(_RAW_MAGIC) + 8, width, height, path)
    if not np.isin(plane, (-1.0, 0.0, 1.0)).all():
        raise FormatError(f"{path}: modification entries must be -1, 0 or +1")
    return ModificationMap(plane.astype(np.int8))


def write_modification_map(mods: ModificationMap, path) -> None:
    header = _RAW_MAGIC + struct.pack("<II", mods.width, mods.height)
    Path(path).write_bytes(header + mods.values.astype("<f4").tobytes())


def read_manifest(path) -> list[Path]:
    """Relative paths, one per line, resolved against the manifest's directory."""
    base = Path(path).parent
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    out = []
    for line in lines:
        line = line.strip()
        if line:
            out.append(base / line)
    return out


def write_manifest(paths, manifest_path) -> None:
    base = Path(manifest_path).parent
    rels = [str(Path(p).relative_to(base)) for p in paths]
    Path(manifest_path).write_text("\n".join(rels) + "\n", encoding="utf-8")
