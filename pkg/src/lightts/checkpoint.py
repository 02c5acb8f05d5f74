"""Checkpoint serialization: text manifest plus a binary blob.

Manifest: one line per array, `name rows cols offset`, in model manifest
order. Blob: the arrays' float64 little-endian bytes concatenated at the
stated offsets. 1-D arrays are stored as a single row.
"""

import numpy as np

from .errors import ShapeError


def _rows_cols(arr: np.ndarray):
    if arr.ndim == 1:
        return 1, arr.shape[0]
    if arr.ndim == 2:
        return arr.shape
    raise ShapeError(f"checkpoint arrays must be 1-D or 2-D, got shape {arr.shape}")


def save_checkpoint(manifest_path, blob_path, params) -> None:
    """Write all arrays of a ModelParams (frozen ones included)."""
    lines = []
    chunks = []
    offset = 0
    for t in params.tensors():
        rows, cols = _rows_cols(t.value)
        data = np.ascontiguousarray(t.value, dtype="<f8").tobytes()
        lines.append(f"{t.name} {rows} {cols} {offset}")
        chunks.append(data)
        offset += len(data)
    with open(manifest_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    with open(blob_path, "wb") as fh:
        fh.write(b"".join(chunks))


def load_checkpoint(manifest_path, blob_path) -> dict:
    """Read back name -> float64 array (shape as stored)."""
    with open(manifest_path, "r", encoding="utf-8") as fh:
        entries = []
        for ln, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 4:
                raise ShapeError(f"{manifest_path}: line {ln} is not 'name rows cols offset'")
            name, rows, cols, offset = parts[0], int(parts[1]), int(parts[2]), int(parts[3])
            entries.append((name, rows, cols, offset))
    blob = open(blob_path, "rb").read()
    out = {}
    for name, rows, cols, offset in entries:
        n = rows * cols
        raw = blob[offset:offset + 8 * n]
        if len(raw) != 8 * n:
            raise ShapeError(f"{blob_path}: truncated blob for array {name}")
        out[name] = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(rows, cols)
    return out


def restore_params(params, arrays: dict) -> None:
    """Load stored arrays into a freshly initialized ModelParams in place."""
    tensors = {t.name: t for t in params.tensors()}
    if set(tensors) != set(arrays):
        missing = sorted(set(tensors) - set(arrays))
        extra = sorted(set(arrays) - set(tensors))
        raise ShapeError(
            f"checkpoint does not match the configured model: "
            f"missing={missing}, unexpected={extra}"
        )
    for name, t in tensors.items():
        stored = arrays[name]
        want = _rows_cols(t.value)
        if stored.shape != want:
            raise ShapeError(
                f"array {name}: checkpoint shape {stored.shape} != model shape {want}"
            )
        t.value[...] = stored.reshape(t.value.shape)
