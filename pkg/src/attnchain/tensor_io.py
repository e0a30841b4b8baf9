"""File ingestion and export: manifest JSON, NPY v1.0 arrays, PGM/CSV
heatmaps.

The NPY reader/writer is deliberately hand-rolled and restricted to
version 1.0, little-endian f4/f8, C order: loads must be bit-exact and
malformed inputs must fail with precise errors.
"""
from __future__ import annotations

import ast
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core_chain import StateVector, from_raw
from .errors import (
    BadMagic,
    FortranOrderUnsupported,
    GridMismatch,
    MissingFile,
    ParseError,
    SchemaViolation,
    TruncatedData,
    UnsupportedDtype,
    UnsupportedVersion,
)
from .ops import AttentionTensor

_MAGIC = b"\x93NUMPY"
_DTYPES = {"f32": "<f4", "f64": "<f8"}


@dataclass(frozen=True)
class ManifestEntry:
    layer: int
    heads: int
    dtype: str
    path: str
    shape: tuple


@dataclass(frozen=True)
class Manifest:
    version: str
    seq_len: int
    grid: tuple | None
    special_tokens: tuple
    entries: tuple
    base_dir: Path

    def entry_path(self, entry: ManifestEntry) -> Path:
        return self.base_dir / entry.path


def load_manifest(path) -> Manifest:
    """Parse and validate a manifest JSON file. Unknown fields are ignored
    for forward compatibility."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"manifest not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError(f"manifest is not valid JSON: {exc}") from exc
    return _validate_manifest(raw, path.parent)


def _validate_manifest(raw, base_dir: Path) -> Manifest:
    if not isinstance(raw, dict):
        raise SchemaViolation("manifest root must be an object")
    try:
        version = raw["version"]
        seq_len = raw["seq_len"]
        grid = raw["grid"]
        special = raw["special_tokens"]
        entries_raw = raw["entries"]
    except KeyError as exc:
        raise SchemaViolation(f"manifest missing key {exc}") from exc
    if version != "1":
        raise SchemaViolation(f"unsupported manifest version {version!r}")
    if not isinstance(seq_len, int) or seq_len < 1:
        raise SchemaViolation("seq_len must be a positive integer")
    if grid is not None:
        if (not isinstance(grid, list) or len(grid) != 2
                or not all(isinstance(g, int) and g > 0 for g in grid)):
            raise SchemaViolation("grid must be null or [height, width]")
        if grid[0] * grid[1] + len(special) != seq_len:
            raise SchemaViolation("grid area plus special tokens must equal seq_len")
        grid = (grid[0], grid[1])
    if (not isinstance(special, list)
            or not all(isinstance(s, int) and 0 <= s < seq_len for s in special)
            or len(set(special)) != len(special)):
        raise SchemaViolation("special_tokens must be unique indices < seq_len")
    if not isinstance(entries_raw, list) or not entries_raw:
        raise SchemaViolation("entries must be a non-empty list")

    entries = []
    seen_layers = set()
    for e in entries_raw:
        if not isinstance(e, dict):
            raise SchemaViolation("each entry must be an object")
        try:
            layer, heads = e["layer"], e["heads"]
            dtype, rel_path, shape = e["dtype"], e["path"], e["shape"]
        except KeyError as exc:
            raise SchemaViolation(f"entry missing key {exc}") from exc
        if not isinstance(layer, int) or layer in seen_layers:
            raise SchemaViolation(f"layer indices must be unique ints, got {layer!r}")
        seen_layers.add(layer)
        if dtype not in _DTYPES:
            raise SchemaViolation(f"entry dtype must be f32 or f64, got {dtype!r}")
        if (not isinstance(shape, list) or len(shape) != 3
                or shape != [heads, seq_len, seq_len]):
            raise SchemaViolation(
                f"entry shape must be [heads, seq_len, seq_len], got {shape!r}"
            )
        entries.append(ManifestEntry(layer, heads, dtype, rel_path, tuple(shape)))
    entries.sort(key=lambda e: e.layer)
    return Manifest("1", seq_len, grid, tuple(sorted(special)),
                    tuple(entries), base_dir)


def save_manifest(path, seq_len: int, grid, special_tokens, entries) -> None:
    """Write a manifest; entries are (layer, heads, dtype, rel_path) tuples."""
    doc = {
        "version": "1",
        "seq_len": seq_len,
        "grid": list(grid) if grid is not None else None,
        "special_tokens": list(special_tokens),
        "entries": [
            {"layer": layer, "heads": heads, "dtype": dtype, "path": rel,
             "shape": [heads, seq_len, seq_len]}
            for layer, heads, dtype, rel in entries
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


# -- NPY v1.0 ----------------------------------------------------------------

def load_array(path) -> np.ndarray:
    """Read an NPY v1.0 file (little-endian f4/f8, C order). f4 data is
    upcast to f8."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"array file not found: {path}")
    data = path.read_bytes()
    if len(data) < 10:
        raise TruncatedData(f"{path}: file shorter than the NPY preamble")
    if data[:6] != _MAGIC:
        raise BadMagic(f"{path}: bad magic bytes {data[:6]!r}")
    if data[6:8] != b"\x01\x00":
        raise UnsupportedVersion(
            f"{path}: only NPY v1.0 is supported, got {data[6]}.{data[7]}"
        )
    (header_len,) = struct.unpack("<H", data[8:10])
    if len(data) < 10 + header_len:
        raise TruncatedData(f"{path}: truncated header")
    try:
        header = ast.literal_eval(data[10:10 + header_len].decode("latin1"))
        descr = header["descr"]
        fortran = header["fortran_order"]
        shape = header["shape"]
    except Exception as exc:
        raise ParseError(f"{path}: malformed NPY header: {exc}") from exc
    if descr not in ("<f4", "<f8"):
        raise UnsupportedDtype(f"{path}: unsupported descr {descr!r}")
    if fortran:
        raise FortranOrderUnsupported(f"{path}: fortran_order arrays unsupported")
    count = int(np.prod(shape, dtype=np.int64)) if shape else 1
    itemsize = 4 if descr == "<f4" else 8
    payload = data[10 + header_len:]
    if len(payload) < count * itemsize:
        raise TruncatedData(
            f"{path}: expected {count * itemsize} data bytes, got {len(payload)}"
        )
    arr = np.frombuffer(payload[:count * itemsize], dtype=descr).reshape(shape)
    return arr.astype(np.float64)


def save_array(path, array, dtype: str = "f64") -> None:
    """Write an NPY v1.0 file with the header space-padded to 64-byte
    alignment. dtype is "f32" or "f64"; rank must be >= 1."""
    if dtype not in _DTYPES:
        raise UnsupportedDtype(f"dtype must be f32 or f64, got {dtype!r}")
    if np.asarray(array).ndim < 1:
        raise SchemaViolation("cannot save a rank-0 array")
    arr = np.ascontiguousarray(array, dtype=_DTYPES[dtype])
    shape = arr.shape
    shape_repr = f"({shape[0]},)" if len(shape) == 1 else repr(tuple(shape))
    header = (f"{{'descr': '{_DTYPES[dtype]}', 'fortran_order': False, "
              f"'shape': {shape_repr}, }}")
    total = 10 + len(header) + 1  # preamble + dict + trailing newline
    padded = ((total + 63) // 64) * 64
    header = header + " " * (padded - total) + "\n"
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(b"\x01\x00")
        fh.write(struct.pack("<H", len(header)))
        fh.write(header.encode("latin1"))
        fh.write(arr.tobytes())


# -- attention tensors -------------------------------------------------------

def load_attention_tensor(manifest: Manifest,
                          repair_policy: str = "clamp_and_renormalize"
                          ) -> AttentionTensor:
    """Materialize the manifest's matrices as a validated AttentionTensor."""
    layers = []
    for entry in manifest.entries:
        arr = load_array(manifest.entry_path(entry))
        if arr.shape != entry.shape:
            raise SchemaViolation(
                f"{entry.path}: declared shape {entry.shape}, file has {arr.shape}"
            )
        layers.append(tuple(from_raw(arr[h], repair_policy)
                            for h in range(entry.heads)))
    return AttentionTensor(tuple(layers), manifest.special_tokens, manifest.grid)


# -- heatmap export ----------------------------------------------------------

def _split_spatial(v: StateVector, grid, special_tokens):
    h, w = grid
    special = sorted(set(special_tokens))
    if h * w + len(special) != v.n:
        raise GridMismatch(
            f"grid {h}x{w} plus {len(special)} special tokens != vector length {v.n}"
        )
    mask = np.ones(v.n, dtype=bool)
    mask[list(special)] = False
    spatial = v.probs[mask].reshape(h, w)
    return spatial, [(i, v.probs[i]) for i in special]


def format_float(x: float) -> str:
    return f"{x:.17g}"


def export_heatmap(v: StateVector, grid, special_tokens, path,
                   fmt: str = "pgm") -> None:
    """Write the spatial part of v as a PGM (min-max quantized) or CSV
    (full precision) grid. Special-token values go to a sidecar CSV."""
    spatial, special_vals = _split_spatial(v, grid, special_tokens)
    path = Path(path)
    if fmt == "pgm":
        lo, hi = spatial.min(), spatial.max()
        if hi > lo:
            pixels = np.rint(255.0 * (spatial - lo) / (hi - lo)).astype(np.uint8)
        else:
            pixels = np.zeros_like(spatial, dtype=np.uint8)
        h, w = spatial.shape
        with open(path, "wb") as fh:
            fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
            fh.write(pixels.tobytes())
    elif fmt == "csv":
        lines = [",".join(format_float(x) for x in row) for row in spatial]
        path.write_text("\n".join(lines) + "\n", encoding="ascii")
    else:
        raise ValueError(f"unknown heatmap format {fmt!r}")
    if special_vals:
        sidecar = path.with_name(path.name + ".special.csv")
        sidecar.write_text(
            "\n".join(f"{i},{format_float(val)}" for i, val in special_vals) + "\n",
            encoding="ascii",
        )
