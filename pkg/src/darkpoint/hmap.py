"""HMAP heatmap files.

Layout, all little-endian::

    b"HMAP"  u16 version (=1)  u32 W  u32 H  f64 ratio  float32[H*W] row-major
"""

import os
import struct
import threading

import numpy as np

from .encoder import MIN_SIZE, Heatmap
from .errors import HmapFormatError

MAGIC = b"HMAP"
VERSION = 1
_HEADER = struct.Struct("<4sHIId")
HEADER_SIZE = _HEADER.size


def file_size(width, height):
    return HEADER_SIZE + 4 * width * height


def dumps(h: Heatmap) -> bytes:
    body = np.ascontiguousarray(h.data, dtype="<f4").tobytes()
    return _HEADER.pack(MAGIC, VERSION, h.width, h.height, h.ratio) + body


def loads(buf: bytes, name="<bytes>") -> Heatmap:
    if len(buf) < HEADER_SIZE:
        if not MAGIC.startswith(bytes(buf[:4])):
            raise HmapFormatError(name, "bad magic")
        raise HmapFormatError(name, f"truncated header ({len(buf)} bytes)")
    magic, version, width, height, ratio = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise HmapFormatError(name, f"bad magic {magic!r}")
    if version != VERSION:
        raise HmapFormatError(name, f"unsupported version {version}")
    if width < MIN_SIZE or height < MIN_SIZE:
        raise HmapFormatError(name, f"heatmap too small ({width}x{height})")
    if not (np.isfinite(ratio) and ratio > 0):
        raise HmapFormatError(name, f"invalid ratio {ratio}")
    expected = file_size(width, height)
    if len(buf) != expected:
        kind = "truncated" if len(buf) < expected else "trailing bytes in"
        raise HmapFormatError(name, f"{kind} data: {len(buf)} bytes, expected {expected}")
    data = np.frombuffer(buf, dtype="<f4", count=width * height, offset=HEADER_SIZE)
    if not np.all(np.isfinite(data)):
        raise HmapFormatError(name, "non-finite activation")
    return Heatmap(data.astype(np.float64).reshape(height, width), ratio)


def atomic_write(path, payload: bytes):
    """Write ``payload`` to a sibling temp file, then rename over ``path``."""
    path = os.fspath(path)
    tmp = os.path.join(os.path.dirname(os.path.abspath(path)),
                       f".{os.path.basename(path)}.{os.getpid()}.{threading.get_ident()}.tmp")
    try:
        with open(tmp, "wb") as f:
            f.write(payload)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def write_hmap(path, h: Heatmap):
    atomic_write(path, dumps(h))


def read_hmap(path) -> Heatmap:
    with open(path, "rb") as f:
        buf = f.read()
    return loads(buf, os.fspath(path))
