"""Binary file formats shared across the toolkit.

Two container formats, both little-endian:

* ``MVRL`` matrices — magic ``MVRL``, version u32, rows u64, cols u64, then
  the row-major f64 payload.  Bit-exact contract for cross-language interop.
* ``MVNN`` models — magic ``MVNN``, version u32.  Version 1 is a single bare
  MLP (see :mod:`mvtrace.nn`).  Version 2 extends it with a length-prefixed
  JSON text header plus a sequence of named MLP blocks, used to persist
  representation models together with their normalization statistics.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from . import nn

MATRIX_MAGIC = b"MVRL"
MATRIX_VERSION = 1
MODEL_VERSION_BARE = 1
MODEL_VERSION_CONTAINER = 2


def write_matrix(path, array: np.ndarray) -> None:
    """Write a 1-D or 2-D float array as an MVRL file (1-D becomes a column)."""
    array = np.asarray(array, dtype=np.float64)
    if array.ndim == 1:
        array = array[:, None]
    if array.ndim != 2:
        raise ValueError(f"MVRL stores matrices, got ndim={array.ndim}")
    with open(path, "wb") as fh:
        fh.write(MATRIX_MAGIC)
        fh.write(struct.pack("<I", MATRIX_VERSION))
        fh.write(struct.pack("<QQ", array.shape[0], array.shape[1]))
        fh.write(np.ascontiguousarray(array, dtype="<f8").tobytes())


def read_matrix(path) -> np.ndarray:
    rows, cols, payload = _read_matrix_raw(path)
    return np.frombuffer(payload, dtype="<f8").reshape(rows, cols).astype(np.float64)


def read_matrix_header(path) -> dict:
    rows, cols, _ = _read_matrix_raw(path, header_only=True)
    return {"format": "MVRL", "version": MATRIX_VERSION, "rows": rows, "cols": cols}


def _read_matrix_raw(path, header_only: bool = False):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MATRIX_MAGIC:
            raise ValueError(f"{path}: not an MVRL file (magic {magic!r})")
        (version,) = struct.unpack("<I", _read_exact(fh, 4))
        if version != MATRIX_VERSION:
            raise ValueError(f"{path}: unsupported MVRL version {version}")
        rows, cols = struct.unpack("<QQ", _read_exact(fh, 16))
        if header_only:
            return rows, cols, b""
        payload = _read_exact(fh, 8 * rows * cols)
    return rows, cols, payload


def write_model_container(path, header: dict, blocks: dict[str, "nn.MLP"]) -> None:
    """Write a version-2 MVNN container: JSON header + named MLP blocks."""
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(nn.MODEL_MAGIC)
        fh.write(struct.pack("<I", MODEL_VERSION_CONTAINER))
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        fh.write(struct.pack("<I", len(blocks)))
        for name, mlp in blocks.items():
            name_bytes = name.encode("utf-8")
            fh.write(struct.pack("<I", len(name_bytes)))
            fh.write(name_bytes)
            nn.write_mlp_payload(fh, mlp)


def read_model_container(path):
    """Read a version-2 MVNN container; returns (header dict, blocks dict)."""
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4)
        if magic != nn.MODEL_MAGIC:
            raise ValueError(f"{path}: not an MVNN file (magic {magic!r})")
        (version,) = struct.unpack("<I", _read_exact(fh, 4))
        if version != MODEL_VERSION_CONTAINER:
            raise ValueError(
                f"{path}: expected MVNN container (version 2), got {version}"
            )
        (header_len,) = struct.unpack("<I", _read_exact(fh, 4))
        header = json.loads(_read_exact(fh, header_len).decode("utf-8"))
        (n_blocks,) = struct.unpack("<I", _read_exact(fh, 4))
        blocks = {}
        for _ in range(n_blocks):
            (name_len,) = struct.unpack("<I", _read_exact(fh, 4))
            name = _read_exact(fh, name_len).decode("utf-8")
            blocks[name] = nn.read_mlp_payload(fh)
    return header, blocks


def describe(path) -> dict:
    """Header summary of an MVRL or MVNN file (for the ``inspect`` command)."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == MATRIX_MAGIC:
        return read_matrix_header(path)
    if magic == nn.MODEL_MAGIC:
        with open(path, "rb") as fh:
            fh.read(4)
            (version,) = struct.unpack("<I", _read_exact(fh, 4))
        if version == MODEL_VERSION_BARE:
            mlp = nn.load_mlp(path)
            return {
                "format": "MVNN",
                "version": 1,
                "layers": [
                    {"fan_in": l.fan_in, "fan_out": l.fan_out, "activation": l.activation}
                    for l in mlp.layers
                ],
            }
        header, blocks = read_model_container(path)
        return {
            "format": "MVNN",
            "version": 2,
            "header": header,
            "blocks": {
                name: [
                    {"fan_in": l.fan_in, "fan_out": l.fan_out, "activation": l.activation}
                    for l in mlp.layers
                ]
                for name, mlp in blocks.items()
            },
        }
    raise ValueError(f"{path}: unrecognized magic {magic!r}")


def _read_exact(fh, n: int) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise ValueError(f"truncated file: wanted {n} bytes, got {len(data)}")
    return data
