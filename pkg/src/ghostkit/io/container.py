"""GITK container: one little-endian array plus a JSON metadata object.

Layout::

    b"GITK"            magic
    u32                version
    u32                dtype code (1 = f32, 2 = f64, 3 = u16)
    u32                ndim
    u64 * ndim         dims
    payload            row-major, little-endian
    u64                metadata byte length
    UTF-8 JSON object  metadata
"""

import json
import struct
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from ghostkit.errors import ContainerError
from ghostkit.io.reports import to_jsonable

MAGIC = b"GITK"
VERSION = 1
DTYPE_CODES = {1: np.dtype("<f4"), 2: np.dtype("<f8"), 3: np.dtype("<u2")}
CODES_BY_KIND = {("f", 4): 1, ("f", 8): 2, ("u", 2): 3}

PathLike = Union[str, Path]


def encode_container(array: np.ndarray, metadata: Optional[Dict[str, Any]] = None) -> bytes:
    array = np.asarray(array)
    code = CODES_BY_KIND.get((array.dtype.kind, array.dtype.itemsize))
    if code is None:
        raise ContainerError(f"unsupported dtype {array.dtype} (use float32, float64 or uint16)")
    meta = json.dumps(to_jsonable(metadata or {}), sort_keys=True, separators=(",", ":")).encode("utf-8")
    header = MAGIC + struct.pack("<III", VERSION, code, array.ndim)
    header += struct.pack(f"<{array.ndim}Q", *array.shape)
    payload = np.ascontiguousarray(array, dtype=DTYPE_CODES[code]).tobytes()
    return header + payload + struct.pack("<Q", len(meta)) + meta


def decode_container(data: bytes) -> Tuple[np.ndarray, Dict[str, Any]]:
    if len(data) < 16 or data[:4] != MAGIC:
        raise ContainerError("not a GITK container (bad magic)")
    version, code, ndim = struct.unpack_from("<III", data, 4)
    if version != VERSION:
        raise ContainerError(f"unsupported GITK version {version}")
    if code not in DTYPE_CODES:
        raise ContainerError(f"unknown dtype code {code}")
    offset = 16
    if len(data) < offset + 8 * ndim:
        raise ContainerError("truncated GITK header")
    dims = struct.unpack_from(f"<{ndim}Q", data, offset)
    offset += 8 * ndim
    dtype = DTYPE_CODES[code]
    nbytes = int(np.prod(dims, dtype=np.uint64)) * dtype.itemsize
    if len(data) < offset + nbytes + 8:
        raise ContainerError("truncated GITK payload")
    array = np.frombuffer(data, dtype=dtype, count=nbytes // dtype.itemsize, offset=offset).reshape(dims)
    offset += nbytes
    (meta_len,) = struct.unpack_from("<Q", data, offset)
    offset += 8
    if len(data) != offset + meta_len:
        raise ContainerError("GITK metadata length does not match the file size")
    try:
        metadata = json.loads(data[offset:].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ContainerError(f"GITK metadata is not valid JSON: {exc}") from exc
    if not isinstance(metadata, dict):
        raise ContainerError("GITK metadata must be a JSON object")
    return array.astype(dtype.newbyteorder("="), copy=True), metadata


def write_container(path: PathLike, array: np.ndarray, metadata: Optional[Dict[str, Any]] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_container(array, metadata))
    return path


def read_container(path: PathLike) -> Tuple[np.ndarray, Dict[str, Any]]:
    return decode_container(Path(path).read_bytes())
