"""Vector files.

Binary layout: the 8-byte magic ``QSOPTV01``, the entry count as a
little-endian unsigned 64-bit integer, then the entries as little-endian
float64.  Files ending in ``.txt`` hold one value per line instead, printed
with 17 significant digits so they round-trip exactly.
"""

import struct
from pathlib import Path

import numpy as np

from .errors import InvalidInputError

MAGIC = b"QSOPTV01"
_HEADER = struct.Struct("<8sQ")


def _is_text(path):
    return Path(path).suffix.lower() == ".txt"


def write_vector(path, values):
    values = np.ascontiguousarray(values, dtype="<f8")
    if values.ndim != 1:
        raise InvalidInputError("only 1-D vectors can be written")
    path = Path(path)
    if _is_text(path):
        path.write_text("".join(f"{v:.17g}\n" for v in values), encoding="ascii", newline="\n")
    else:
        path.write_bytes(_HEADER.pack(MAGIC, values.size) + values.tobytes())


def read_vector(path):
    path = Path(path)
    if _is_text(path):
        lines = [ln.strip() for ln in path.read_text(encoding="ascii").splitlines()]
        try:
            return np.array([float(ln) for ln in lines if ln], dtype=float)
        except ValueError as exc:
            raise InvalidInputError(f"{path}: {exc}") from None
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise InvalidInputError(f"{path}: file too short for a vector header")
    magic, count = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise InvalidInputError(f"{path}: bad magic {magic!r}")
    body = raw[_HEADER.size :]
    if len(body) != 8 * count:
        raise InvalidInputError(f"{path}: header says {count} entries, body holds {len(body) / 8:g}")
    return np.frombuffer(body, dtype="<f8").astype(float)
