"""Minimal still-frame codecs: binary PGM (P5), binary PPM (P6), and a
restricted PNG reader (8-bit grayscale or RGB, no alpha, no interlacing).

The decoders are deliberately small and strict: they accept exactly the
formats the dataset layout promises and name the offense on anything else.
They are tuned for the small frames this tool ingests, not for bulk decoding.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import DecodeError

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


@dataclass
class RawImage:
    """8-bit image: pixels has shape (rows, cols) for grayscale or
    (rows, cols, 3) for RGB, dtype uint8, row-major with interleaved
    channels."""

    pixels: np.ndarray

    @property
    def rows(self) -> int:
        return self.pixels.shape[0]

    @property
    def cols(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.pixels.ndim == 2 else self.pixels.shape[2]

    def __post_init__(self) -> None:
        if self.pixels.dtype != np.uint8:
            raise DecodeError(f"pixel dtype must be uint8, got {self.pixels.dtype}")
        if self.pixels.ndim == 2:
            return
        if self.pixels.ndim == 3 and self.pixels.shape[2] == 3:
            return
        raise DecodeError(
            f"pixels must be (rows, cols) or (rows, cols, 3), got {self.pixels.shape}"
        )


def decode_image(data: bytes) -> RawImage:
    """Decode a P5/P6/PNG byte stream into a RawImage."""
    if data[:2] in (b"P5", b"P6"):
        return _decode_pnm(data)
    if data[:8] == PNG_SIGNATURE:
        return _decode_png(data)
    raise DecodeError(f"unrecognized image signature {data[:8]!r}")


def _pnm_tokens(data: bytes, count: int) -> tuple[list[int], int]:
    """Read `count` whitespace-separated integer tokens after the magic,
    honoring '#' comments. Returns (values, offset_of_payload)."""
    values: list[int] = []
    i = 2  # past the two magic bytes
    n = len(data)
    while len(values) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i] == ord("#"):
            while i < n and data[i] not in b"\r\n":
                i += 1
            continue
        start = i
        while i < n and not data[i : i + 1].isspace():
            i += 1
        token = data[start:i]
        if not token.isdigit():
            raise DecodeError(f"malformed PNM header token {token!r}")
        values.append(int(token))
    if i >= n:
        raise DecodeError("PNM header ends before payload")
    # exactly one whitespace byte separates the header from the payload
    i += 1
    return values, i


def _decode_pnm(data: bytes) -> RawImage:
    channels = 1 if data[:2] == b"P5" else 3
    (cols, rows, maxval), offset = _pnm_tokens(data, 3)
    if rows < 1 or cols < 1:
        raise DecodeError(f"PNM dimensions must be positive, got {cols}x{rows}")
    if maxval != 255:
        raise DecodeError(f"only maxval 255 is supported, got {maxval}")
    need = rows * cols * channels
    payload = data[offset : offset + need]
    if len(payload) < need:
        raise DecodeError(
            f"PNM payload truncated: header promises {need} bytes, "
            f"found {len(payload)}"
        )
    pixels = np.frombuffer(payload, dtype=np.uint8)
    if channels == 1:
        return RawImage(pixels.reshape(rows, cols).copy())
    return RawImage(pixels.reshape(rows, cols, 3).copy())


def encode_pgm(gray: np.ndarray) -> bytes:
    """Binary P5 bytes for a (rows, cols) uint8 array."""
    if gray.ndim != 2 or gray.dtype != np.uint8:
        raise DecodeError(f"PGM payload must be 2-D uint8, got {gray.dtype} {gray.shape}")
    rows, cols = gray.shape
    return b"P5\n%d %d\n255\n" % (cols, rows) + gray.tobytes()


def encode_ppm(rgb: np.ndarray) -> bytes:
    """Binary P6 bytes for a (rows, cols, 3) uint8 array."""
    if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.dtype != np.uint8:
        raise DecodeError(f"PPM payload must be (rows, cols, 3) uint8, got {rgb.shape}")
    rows, cols = rgb.shape[:2]
    return b"P6\n%d %d\n255\n" % (cols, rows) + rgb.tobytes()


def _png_chunks(data: bytes):
    pos = 8
    while pos < len(data):
        if pos + 8 > len(data):
            raise DecodeError("PNG chunk header truncated")
        (length,) = struct.unpack(">I", data[pos : pos + 4])
        ctype = data[pos + 4 : pos + 8]
        body = data[pos + 8 : pos + 8 + length]
        if len(body) < length or pos + 12 + length > len(data):
            raise DecodeError(f"PNG chunk {ctype!r} truncated")
        (crc,) = struct.unpack(">I", data[pos + 8 + length : pos + 12 + length])
        if zlib.crc32(ctype + body) & 0xFFFFFFFF != crc:
            raise DecodeError(f"PNG chunk {ctype!r} fails its CRC")
        yield ctype, body
        pos += 12 + length


def _decode_png(data: bytes) -> RawImage:
    header = None
    idat = bytearray()
    seen_end = False
    for ctype, body in _png_chunks(data):
        if ctype == b"IHDR":
            if len(body) != 13:
                raise DecodeError("PNG IHDR must be 13 bytes")
            header = struct.unpack(">IIBBBBB", body)
        elif ctype == b"IDAT":
            idat.extend(body)
        elif ctype == b"IEND":
            seen_end = True
            break
    if header is None:
        raise DecodeError("PNG has no IHDR chunk")
    if not seen_end:
        raise DecodeError("PNG has no IEND chunk")
    cols, rows, depth, color_type, compression, filter_method, interlace = header
    if rows < 1 or cols < 1:
        raise DecodeError(f"PNG dimensions must be positive, got {cols}x{rows}")
    if depth != 8:
        raise DecodeError(f"only 8-bit PNG is supported, got bit depth {depth}")
    if color_type not in (0, 2):
        raise DecodeError(
            f"only grayscale (0) and RGB (2) PNG are supported, got color type {color_type}"
        )
    if compression != 0 or filter_method != 0:
        raise DecodeError("nonstandard PNG compression or filter method")
    if interlace != 0:
        raise DecodeError("interlaced PNG is not supported")
    if not idat:
        raise DecodeError("PNG has no IDAT data")

    channels = 1 if color_type == 0 else 3
    try:
        raw = zlib.decompress(bytes(idat))
    except zlib.error as exc:
        raise DecodeError(f"PNG IDAT stream is corrupt: {exc}") from exc
    stride = cols * channels
    if len(raw) != rows * (1 + stride):
        raise DecodeError(
            f"PNG pixel data has {len(raw)} bytes, expected {rows * (1 + stride)}"
        )

    out = np.zeros((rows, stride), dtype=np.uint8)
    prev = np.zeros(stride, dtype=np.int32)
    for r in range(rows):
        ftype = raw[r * (1 + stride)]
        line = np.frombuffer(
            raw, dtype=np.uint8, count=stride, offset=r * (1 + stride) + 1
        ).astype(np.int32)
        recon = _unfilter_row(ftype, line, prev, channels)
        out[r] = recon.astype(np.uint8)
        prev = recon
    if channels == 1:
        return RawImage(out)
    return RawImage(out.reshape(rows, cols, 3))


def _unfilter_row(ftype: int, line: np.ndarray, prev: np.ndarray, bpp: int) -> np.ndarray:
    """Reverse one PNG scanline filter; line and prev are int32 in [0, 255]."""
    if ftype == 0:  # None
        return line
    if ftype == 1:  # Sub: cumulative sum along each bpp-strided chain
        recon = line.copy()
        for c in range(bpp):
            np.cumsum(recon[c::bpp], out=recon[c::bpp])
        return recon % 256
    if ftype == 2:  # Up
        return (line + prev) % 256
    if ftype == 3:  # Average
        recon = line.copy()
        for i in range(len(line)):
            left = recon[i - bpp] if i >= bpp else 0
            recon[i] = (line[i] + (left + prev[i]) // 2) % 256
        return recon
    if ftype == 4:  # Paeth
        recon = line.copy()
        for i in range(len(line)):
            left = int(recon[i - bpp]) if i >= bpp else 0
            up = int(prev[i])
            upleft = int(prev[i - bpp]) if i >= bpp else 0
            p = left + up - upleft
            pa, pb, pc = abs(p - left), abs(p - up), abs(p - upleft)
            if pa <= pb and pa <= pc:
                pred = left
            elif pb <= pc:
                pred = up
            else:
                pred = upleft
            recon[i] = (line[i] + pred) % 256
        return recon
    raise DecodeError(f"unknown PNG scanline filter {ftype}")
