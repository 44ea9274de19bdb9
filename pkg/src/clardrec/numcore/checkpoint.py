"""Array container: a JSON manifest plus a little-endian float32 blob.

Used for model checkpoints, synthetic ground-truth factors, and exported
representations. A checkpoint is a pair of files `<stem>.json` / `<stem>.bin`.
"""

from __future__ import annotations

import json
import os

import numpy as np

from ..errors import DimensionError, FormatError
from .params import ParameterStore

FORMAT = "clardrec-arrays-v1"


def write_arrays(stem: str, arrays: dict[str, np.ndarray], extra: dict | None = None) -> None:
    entries = []
    offset = 0
    blob_parts = []
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr, dtype="<f4")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blob_parts.append(arr.tobytes())
        offset += arr.nbytes
    manifest = {"format": FORMAT, "entries": entries, "total_bytes": offset}
    if extra:
        manifest["extra"] = extra
    with open(stem + ".json", "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
    with open(stem + ".bin", "wb") as fh:
        fh.write(b"".join(blob_parts))


def read_arrays(stem: str) -> tuple[dict[str, np.ndarray], dict]:
    if not os.path.exists(stem + ".json"):
        raise FormatError(f"missing manifest {stem}.json")
    with open(stem + ".json") as fh:
        manifest = json.load(fh)
    if manifest.get("format") != FORMAT:
        raise FormatError(f"unrecognized container format in {stem}.json")
    with open(stem + ".bin", "rb") as fh:
        blob = fh.read()
    if len(blob) != manifest["total_bytes"]:
        raise FormatError(
            f"blob size mismatch in {stem}.bin: "
            f"expected {manifest['total_bytes']}, got {len(blob)}"
        )
    arrays = {}
    for entry in manifest["entries"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(
            blob, dtype="<f4", count=count, offset=entry["offset"]
        ).reshape(shape)
        arrays[entry["name"]] = np.ascontiguousarray(arr)
    return arrays, manifest.get("extra", {})


def save_checkpoint(stem: str, store: ParameterStore, extra: dict | None = None) -> None:
    write_arrays(stem, {n: t.data for n, t in store.items()}, extra=extra)


def load_checkpoint(stem: str, store: ParameterStore) -> dict:
    """Load values into an existing store, validating names and shapes."""
    arrays, extra = read_arrays(stem)
    missing = set(store.names()) - set(arrays)
    unexpected = set(arrays) - set(store.names())
    if missing or unexpected:
        raise FormatError(
            f"checkpoint/model mismatch: missing={sorted(missing)} unexpected={sorted(unexpected)}"
        )
    for name, arr in arrays.items():
        expected = store[name].data.shape
        if arr.shape != expected:
            raise DimensionError(
                f"checkpoint entry '{name}' has shape {arr.shape}, model expects {expected}"
            )
        store.set_value(name, arr)
    return extra
