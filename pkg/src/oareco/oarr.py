"""OARR1 array container format and its text metadata sidecar.

One record = magic bytes ``OARR``, version byte 0x01, then a little-endian
header: name length (u16) + UTF-8 name, dtype code (u8; 0 = IEEE-754 binary32,
1 = binary64, both little-endian), rank (u8), dims (u32 each), followed by the
raw row-major data. A file may hold several records back to back; the record
order is the file's manifest.

The sidecar ``<file>.meta`` is UTF-8 text with one ``key = value`` pair per
line and carries sampling/geometry metadata next to the binary arrays.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"OARR"
VERSION = 1

_DTYPE_CODES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_CODE_FOR_KIND = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}

SIDECAR_SUFFIX = ".meta"


class OarrFormatError(ValueError):
    """Raised when a file does not parse as OARR1."""


def _dtype_code(arr: np.ndarray) -> int:
    code = _CODE_FOR_KIND.get(arr.dtype.newbyteorder("="))
    if code is None:
        raise OarrFormatError(f"unsupported dtype {arr.dtype}; OARR1 stores float32 or float64")
    return code


def write_arrays(path, arrays: dict, metadata: dict | None = None) -> None:
    """Write named arrays to ``path`` as concatenated OARR1 records.

    Record order follows the dict's iteration order. When ``metadata`` is
    given, the ``key = value`` sidecar is written next to the file.
    """
    path = Path(path)
    with open(path, "wb") as fh:
        for name, arr in arrays.items():
            _write_record(fh, name, np.asarray(arr))
    if metadata is not None:
        write_sidecar(path, metadata)


def _write_record(fh, name: str, arr: np.ndarray) -> None:
    if arr.ndim < 1:
        arr = arr.reshape(1)
    encoded = name.encode("utf-8")
    if len(encoded) > 0xFFFF:
        raise OarrFormatError("record name too long")
    code = _dtype_code(arr)
    fh.write(MAGIC)
    fh.write(struct.pack("<B", VERSION))
    fh.write(struct.pack("<H", len(encoded)))
    fh.write(encoded)
    fh.write(struct.pack("<BB", code, arr.ndim))
    fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
    fh.write(np.ascontiguousarray(arr, dtype=_DTYPE_CODES[code]).tobytes())


def read_arrays(path) -> dict:
    """Read every record of an OARR1 file into an ordered name -> array dict."""
    path = Path(path)
    out: dict[str, np.ndarray] = {}
    with open(path, "rb") as fh:
        while True:
            head = fh.read(4)
            if not head:
                break
            if head != MAGIC:
                raise OarrFormatError(f"{path}: bad magic {head!r}")
            (version,) = struct.unpack("<B", _read_exact(fh, 1, path))
            if version != VERSION:
                raise OarrFormatError(f"{path}: unsupported version {version}")
            (name_len,) = struct.unpack("<H", _read_exact(fh, 2, path))
            name = _read_exact(fh, name_len, path).decode("utf-8")
            code, rank = struct.unpack("<BB", _read_exact(fh, 2, path))
            if code not in _DTYPE_CODES:
                raise OarrFormatError(f"{path}: unknown dtype code {code}")
            dims = struct.unpack(f"<{rank}I", _read_exact(fh, 4 * rank, path))
            dtype = _DTYPE_CODES[code]
            count = int(np.prod(dims, dtype=np.int64)) if rank else 1
            raw = _read_exact(fh, count * dtype.itemsize, path)
            if name in out:
                raise OarrFormatError(f"{path}: duplicate record name {name!r}")
            out[name] = np.frombuffer(raw, dtype=dtype).reshape(dims).copy()
    return out


def _read_exact(fh, n: int, path) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise OarrFormatError(f"{path}: truncated file")
    return data


def write_array(path, name: str, arr, metadata: dict | None = None) -> None:
    write_arrays(path, {name: arr}, metadata)


def read_array(path, name: str | None = None) -> np.ndarray:
    """Read one record; with ``name=None`` the file must hold exactly one."""
    arrays = read_arrays(path)
    if name is None:
        if len(arrays) != 1:
            raise OarrFormatError(f"{path}: expected a single record, found {len(arrays)}")
        return next(iter(arrays.values()))
    if name not in arrays:
        raise OarrFormatError(f"{path}: no record named {name!r}")
    return arrays[name]


def sidecar_path(path) -> Path:
    return Path(str(path) + SIDECAR_SUFFIX)


def write_sidecar(path, metadata: dict) -> None:
    sidecar_path(path).write_text(format_keyvalues(metadata), encoding="utf-8")


def format_keyvalues(metadata: dict) -> str:
    """Serialize a mapping to ``key = value`` text; floats keep full precision."""
    return "\n".join(f"{key} = {_format_value(value)}" for key, value in metadata.items()) + "\n"


def read_sidecar(path) -> dict:
    """Parse a ``key = value`` sidecar into a str -> str dict."""
    text = sidecar_path(path).read_text(encoding="utf-8")
    return parse_keyvalues(text, source=str(sidecar_path(path)))


def parse_keyvalues(text: str, source: str = "<text>") -> dict:
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise OarrFormatError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, value = stripped.split("=", 1)
        key = key.strip()
        if not key:
            raise OarrFormatError(f"{source}:{lineno}: empty key")
        if key in out:
            raise OarrFormatError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def _format_value(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)
