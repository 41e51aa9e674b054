"""Bit-exact weights file format.

Layout (all integers little-endian):

    magic   4 bytes  b"CVWT"
    version u32
    count   u32                      number of tensors
    per tensor:
        name_len u16, name UTF-8     "<node name>/<field>"
        dtype    u8                  0 = float32, 1 = float64
        ndim     u8
        dims     ndim * u32
        data     raw little-endian values, C order
    crc32   u32 (optional)           zlib.crc32 of everything before it

Tensors are written in store order (node insertion order, i.e. topological
order for stores made by init_params) with fields in the canonical field
order, so save/load round-trips are byte-identical.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .engine import FIELD_ORDER, ParamStore

MAGIC = b"CVWT"
VERSION = 1
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


class WeightsError(ValueError):
    pass


def save_weights(store: ParamStore, path, checksum: bool = True) -> None:
    entries = []
    for node_name, fields in store.items():
        for fname in FIELD_ORDER:
            if fname in fields:
                entries.append((f"{node_name}/{fname}", fields[fname]))
    buf = bytearray()
    buf += MAGIC
    buf += struct.pack("<II", VERSION, len(entries))
    for name, arr in entries:
        raw = name.encode("utf-8")
        buf += struct.pack("<H", len(raw)) + raw
        if arr.dtype == np.float32:
            code, wire = 0, "<f4"
        elif arr.dtype == np.float64:
            code, wire = 1, "<f8"
        else:
            raise WeightsError(f"tensor {name!r}: unsupported dtype {arr.dtype}")
        buf += struct.pack("<BB", code, arr.ndim)
        buf += struct.pack(f"<{arr.ndim}I", *arr.shape)
        buf += np.ascontiguousarray(arr, dtype=wire).tobytes()
    if checksum:
        buf += struct.pack("<I", zlib.crc32(bytes(buf)))
    with open(path, "wb") as fh:
        fh.write(buf)


def load_weights(path) -> ParamStore:
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] != MAGIC:
        raise WeightsError(f"{path}: bad magic {buf[:4]!r}, expected {MAGIC!r}")
    version, count = struct.unpack_from("<II", buf, 4)
    if version != VERSION:
        raise WeightsError(f"{path}: unsupported version {version}")
    pos = 12
    store: ParamStore = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", buf, pos)
        pos += 2
        name = buf[pos:pos + name_len].decode("utf-8")
        pos += name_len
        code, ndim = struct.unpack_from("<BB", buf, pos)
        pos += 2
        if code not in _DTYPES:
            raise WeightsError(f"{path}: tensor {name!r} has unknown dtype code {code}")
        dims = struct.unpack_from(f"<{ndim}I", buf, pos)
        pos += 4 * ndim
        dtype = _DTYPES[code]
        nbytes = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize if ndim else dtype.itemsize
        if pos + nbytes > len(buf):
            raise WeightsError(f"{path}: truncated data for tensor {name!r}")
        arr = np.frombuffer(buf[pos:pos + nbytes], dtype=dtype).reshape(dims).copy()
        pos += nbytes
        node_name, _, field = name.rpartition("/")
        if field not in FIELD_ORDER or not node_name:
            raise WeightsError(f"{path}: tensor name {name!r} does not end in a "
                               f"known field ({', '.join(FIELD_ORDER)})")
        store.setdefault(node_name, {})[field] = arr
    trailing = len(buf) - pos
    if trailing == 4:
        (expected,) = struct.unpack_from("<I", buf, pos)
        actual = zlib.crc32(buf[:pos])
        if actual != expected:
            raise WeightsError(f"{path}: CRC mismatch "
                               f"(stored {expected:#010x}, computed {actual:#010x})")
    elif trailing != 0:
        raise WeightsError(f"{path}: {trailing} unexpected trailing bytes")
    return store
