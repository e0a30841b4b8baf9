"""Writers for the interchange format consumed by the attnchain CLI:
a manifest JSON plus one NPY v1.0 file (little-endian f32, C order) per
layer. Kept dependency-free on the consumer so the wire format is the
only coupling point."""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

_MAGIC = b"\x93NUMPY"


def save_npy_f32(path, array) -> None:
    """NPY v1.0 writer, header space-padded to 64-byte alignment."""
    arr = np.ascontiguousarray(array, dtype="<f4")
    shape = arr.shape
    shape_repr = f"({shape[0]},)" if len(shape) == 1 else repr(tuple(shape))
    header = (f"{{'descr': '<f4', 'fortran_order': False, "
              f"'shape': {shape_repr}, }}")
    total = 10 + len(header) + 1
    padded = ((total + 63) // 64) * 64
    header = header + " " * (padded - total) + "\n"
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(b"\x01\x00")
        fh.write(struct.pack("<H", len(header)))
        fh.write(header.encode("latin1"))
        fh.write(arr.tobytes())


def save_manifest(path, seq_len: int, grid, special_tokens,
                  entries) -> None:
    """entries: (layer, heads, rel_path) tuples; dtype is always f32."""
    doc = {
        "version": "1",
        "seq_len": seq_len,
        "grid": list(grid) if grid is not None else None,
        "special_tokens": list(special_tokens),
        "entries": [
            {"layer": layer, "heads": heads, "dtype": "f32", "path": rel,
             "shape": [heads, seq_len, seq_len]}
            for layer, heads, rel in entries
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
