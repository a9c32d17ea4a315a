"""Dense binary relation-matrix format.

Layout, all little-endian:  magic ``RASM``, version byte 1, u32 side length
n, u16 relation-vocabulary size, then n*n u16 relation ids row-major with
the row being the head item.
"""

import struct
from pathlib import Path

import numpy as np

from .relations import RELATION_COUNT

MAGIC = b"RASM"
VERSION = 1

_HEADER = struct.Struct("<4sBIH")


def write_rasm(path: str | Path, matrix: np.ndarray, relation_count: int = RELATION_COUNT) -> None:
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"matrix must be square, got shape {matrix.shape}")
    if matrix.size and int(matrix.max()) >= relation_count:
        raise ValueError(f"relation id {int(matrix.max())} outside vocabulary of {relation_count}")
    n = matrix.shape[0]
    payload = matrix.astype("<u2").tobytes()
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, n, relation_count))
        f.write(payload)


def read_rasm(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, n, mu = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    expected = _HEADER.size + 2 * n * n
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(raw)}")
    matrix = np.frombuffer(raw, dtype="<u2", offset=_HEADER.size).reshape(n, n)
    if matrix.size and int(matrix.max()) >= mu:
        raise ValueError(f"{path}: relation id {int(matrix.max())} outside vocabulary of {mu}")
    return matrix.copy()
