"""Tensor file I/O (.npy v1.0 and raw+sidecar) and run manifests.

The .npy parser is deliberately hand-rolled so malformed files produce
diagnostics naming the byte offset instead of a generic failure. Only the
four dtypes the toolkit uses are supported: f32, f64, u8, i64.
"""

from __future__ import annotations

import ast
import json
from pathlib import Path

import numpy as np

from .errors import TensorFormatError

MAGIC = b"\x93NUMPY"

_DTYPES = {
    "<f4": np.dtype("<f4"),
    "<f8": np.dtype("<f8"),
    "|u1": np.dtype("u1"),
    "<i8": np.dtype("<i8"),
}
_SHORT_NAMES = {"f32": "<f4", "f64": "<f8", "u8": "|u1", "i64": "<i8"}


def read_tensor(path) -> np.ndarray:
    """Load a tensor from a .npy file or a raw file with a JSON sidecar.

    A file starting with the .npy magic is parsed as .npy v1.0 (v2.x headers
    are accepted too); anything else needs ``<path>.json`` next to it with
    ``{"dtype": "f32"|"f64"|"u8"|"i64", "shape": [...]}``. Fortran-ordered
    payloads are converted to row-major on load.
    """
    path = Path(path)
    data = path.read_bytes()
    if data[: len(MAGIC)] == MAGIC:
        return _read_npy(data, path)
    sidecar = path.with_name(path.name + ".json")
    if sidecar.exists():
        return _read_raw(data, sidecar, path)
    raise TensorFormatError(
        f"{path}: bad magic at offset 0 (not a .npy file) and no sidecar "
        f"{sidecar.name} found"
    )


def _read_npy(data: bytes, path: Path) -> np.ndarray:
    if len(data) < 10:
        raise TensorFormatError(
            f"{path}: truncated header at offset {len(data)} (need 10 bytes)"
        )
    major, minor = data[6], data[7]
    if major == 1:
        header_len = int.from_bytes(data[8:10], "little")
        header_start = 10
    elif major == 2:
        if len(data) < 12:
            raise TensorFormatError(f"{path}: truncated v2 header at offset {len(data)}")
        header_len = int.from_bytes(data[8:12], "little")
        header_start = 12
    else:
        raise TensorFormatError(
            f"{path}: unsupported format version {major}.{minor} at offset 6"
        )
    header_end = header_start + header_len
    if len(data) < header_end:
        raise TensorFormatError(
            f"{path}: truncated header dict at offset {len(data)} "
            f"(expected {header_end} bytes)"
        )
    try:
        header = ast.literal_eval(data[header_start:header_end].decode("latin1"))
    except (ValueError, SyntaxError) as exc:
        raise TensorFormatError(
            f"{path}: unparsable header dict at offset {header_start}: {exc}"
        ) from None
    descr = header.get("descr")
    if descr not in _DTYPES:
        raise TensorFormatError(
            f"{path}: unsupported dtype {descr!r} at offset {header_start} "
            f"(supported: {sorted(_DTYPES)})"
        )
    shape = tuple(header.get("shape", ()))
    fortran = bool(header.get("fortran_order", False))
    dtype = _DTYPES[descr]
    expected = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
    payload = data[header_end:]
    if len(payload) != expected:
        raise TensorFormatError(
            f"{path}: payload is {len(payload)} bytes at offset {header_end}, "
            f"expected {expected} for shape {shape} dtype {descr}"
        )
    arr = np.frombuffer(payload, dtype=dtype)
    order = "F" if fortran else "C"
    return np.ascontiguousarray(arr.reshape(shape, order=order))


def _read_raw(data: bytes, sidecar: Path, path: Path) -> np.ndarray:
    try:
        meta = json.loads(sidecar.read_text())
    except json.JSONDecodeError as exc:
        raise TensorFormatError(f"{sidecar}: invalid JSON sidecar: {exc}") from None
    name = meta.get("dtype")
    if name not in _SHORT_NAMES:
        raise TensorFormatError(
            f"{sidecar}: unsupported dtype {name!r} (supported: "
            f"{sorted(_SHORT_NAMES)})"
        )
    dtype = _DTYPES[_SHORT_NAMES[name]]
    shape = tuple(meta.get("shape", ()))
    expected = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
    if len(data) != expected:
        raise TensorFormatError(
            f"{path}: raw payload is {len(data)} bytes, expected {expected} "
            f"for shape {shape} dtype {name}"
        )
    return np.frombuffer(data, dtype=dtype).reshape(shape).copy()


def write_tensor(path, array: np.ndarray) -> None:
    """Write a .npy v1.0 file (row-major, little-endian)."""
    array = np.ascontiguousarray(array)
    descr = {
        np.dtype("f4"): "<f4", np.dtype("f8"): "<f8",
        np.dtype("u1"): "|u1", np.dtype("i8"): "<i8",
    }.get(array.dtype)
    if descr is None:
        raise TensorFormatError(f"unsupported dtype for writing: {array.dtype}")
    shape = ", ".join(str(s) for s in array.shape)
    if array.ndim == 1:
        shape += ","
    header = f"{{'descr': '{descr}', 'fortran_order': False, 'shape': ({shape}), }}"
    # pad so magic + version + length + header is a multiple of 64
    total = len(MAGIC) + 2 + 2 + len(header) + 1
    pad = (64 - total % 64) % 64
    header = header + " " * pad + "\n"
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(bytes([1, 0]))
        fh.write(len(header).to_bytes(2, "little"))
        fh.write(header.encode("latin1"))
        fh.write(array.tobytes())


def write_manifest(manifest: dict, path) -> None:
    """Canonical JSON: sorted keys, no None values, byte-stable across runs."""
    cleaned = _drop_none(manifest)
    text = json.dumps(cleaned, sort_keys=True, indent=2, allow_nan=False)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text + "\n")


def read_manifest(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _drop_none(obj):
    if isinstance(obj, dict):
        return {k: _drop_none(v) for k, v in obj.items() if v is not None}
    if isinstance(obj, (list, tuple)):
        return [_drop_none(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_drop_none(v) for v in obj.tolist()]
    return obj
