"""Binary file formats: CSCT tensors, CSCD dictionaries, PGM/PPM images.

CSCT: magic "CSCT", version byte 1, little-endian u32 height/width/channels,
then height*width*channels little-endian float32 values in row-major
channel-last order, nothing after them.

CSCD: magic "CSCD", version byte 1, little-endian u32 m/n/c/stride/padding,
then the m atom arrays (each n*n*c float32, row-major channel-last).

Images are binary PGM (P5, one channel) or PPM (P6, three channels) with
maxval 255.  Floats quantize by clamping to [0, 255] then rounding half away
from zero, so repeated write/read is stable.

Malformed input raises ContainerFormatError carrying the byte offset of the
problem.  Write/read round-trips are bit-identical.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

from .dictionary import ConvDictionary
from .errors import ContainerFormatError, DomainError
from .tensor import DTYPE, as_tensor3

_CSCT_MAGIC = b"CSCT"
_CSCD_MAGIC = b"CSCD"
_VERSION = 1


def _check_header(data: bytes, magic: bytes, field_count: int):
    if data[:4] != magic:
        raise ContainerFormatError(
            0, f"bad magic {data[:4]!r}, expected {magic!r}"
        )
    if len(data) < 5:
        raise ContainerFormatError(len(data), "truncated before version byte")
    if data[4] != _VERSION:
        raise ContainerFormatError(4, f"unsupported version {data[4]}")
    end = 5 + 4 * field_count
    if len(data) < end:
        raise ContainerFormatError(len(data), "truncated inside header fields")
    fields = struct.unpack_from(f"<{field_count}I", data, 5)
    for i, value in enumerate(fields):
        if value < 1 and not (magic == _CSCD_MAGIC and i == 4):
            raise ContainerFormatError(5 + 4 * i, f"header field {i} is {value}")
    return fields, end


def _payload(data: bytes, offset: int, count: int) -> np.ndarray:
    end = offset + 4 * count
    if len(data) < end:
        raise ContainerFormatError(
            len(data), f"truncated payload: expected {count} float32 values"
        )
    if len(data) > end:
        raise ContainerFormatError(end, f"{len(data) - end} trailing bytes")
    return np.frombuffer(data, dtype="<f4", count=count, offset=offset)


def write_csct(path, tensor: np.ndarray):
    tensor = as_tensor3(tensor)
    h, w, c = tensor.shape
    with open(path, "wb") as f:
        f.write(_CSCT_MAGIC + bytes([_VERSION]) + struct.pack("<3I", h, w, c))
        f.write(np.ascontiguousarray(tensor, dtype="<f4").tobytes())


def read_csct(path) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    (h, w, c), offset = _check_header(data, _CSCT_MAGIC, 3)
    values = _payload(data, offset, h * w * c)
    return as_tensor3(values.reshape(h, w, c).copy())


def write_cscd(path, D: ConvDictionary):
    m, n, c = D.atom_count, D.atom_size, D.out_channels
    with open(path, "wb") as f:
        f.write(
            _CSCD_MAGIC
            + bytes([_VERSION])
            + struct.pack("<5I", m, n, c, D.stride, D.padding)
        )
        f.write(np.ascontiguousarray(D.atoms, dtype="<f4").tobytes())


def read_cscd(path) -> ConvDictionary:
    with open(path, "rb") as f:
        data = f.read()
    (m, n, c, stride, padding), offset = _check_header(data, _CSCD_MAGIC, 5)
    values = _payload(data, offset, m * n * n * c)
    return ConvDictionary(values.reshape(m, n, n, c).copy(), stride, padding)


def quantize_u8(values: np.ndarray) -> np.ndarray:
    """Clamp to [0, 255] and round half away from zero."""
    clipped = np.clip(values.astype(np.float64), 0.0, 255.0)
    return np.floor(clipped + 0.5).astype(np.uint8)


def write_image(path, tensor: np.ndarray):
    """Write a PGM (1 channel) or PPM (3 channels), maxval 255."""
    tensor = as_tensor3(tensor, "image")
    h, w, c = tensor.shape
    if c == 1:
        magic = b"P5"
    elif c == 3:
        magic = b"P6"
    else:
        raise DomainError(f"images need 1 or 3 channels, got {c}")
    with open(path, "wb") as f:
        f.write(magic + b"\n%d %d\n255\n" % (w, h))
        f.write(quantize_u8(tensor).tobytes())


def _next_token(data: bytes, pos: int):
    """Skip whitespace and # comments, return (token, position_after)."""
    while pos < len(data):
        byte = data[pos : pos + 1]
        if byte == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
        elif byte.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < len(data) and not data[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise ContainerFormatError(start, "truncated image header")
    return data[start:pos], pos


def read_image(path) -> np.ndarray:
    """Read a binary PGM/PPM with maxval 255 into a float32 tensor."""
    with open(path, "rb") as f:
        data = f.read()
    magic = data[:2]
    if magic == b"P5":
        c = 1
    elif magic == b"P6":
        c = 3
    else:
        raise ContainerFormatError(0, f"bad magic {magic!r}, expected P5 or P6")
    pos = 2
    dims = []
    for _ in range(3):
        token, pos = _next_token(data, pos)
        if not token.isdigit():
            raise ContainerFormatError(pos - len(token), f"bad header token {token!r}")
        dims.append(int(token))
    w, h, maxval = dims
    if w < 1 or h < 1:
        raise ContainerFormatError(2, f"bad image dims {w}x{h}")
    if maxval != 255:
        raise ContainerFormatError(pos - len(str(maxval)), f"maxval must be 255, got {maxval}")
    pos += 1
    end = pos + h * w * c
    if len(data) < end:
        raise ContainerFormatError(len(data), f"truncated pixels: expected {h * w * c} bytes")
    if len(data) > end:
        raise ContainerFormatError(end, f"{len(data) - end} trailing bytes")
    pixels = np.frombuffer(data, dtype=np.uint8, count=h * w * c, offset=pos)
    return pixels.reshape(h, w, c).astype(DTYPE)


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()
