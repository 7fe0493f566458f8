"""Binary checkpoint container with a bit-exact round trip.

Layout:

* 8 magic bytes ``HLAGCKP1``
* uint32 little-endian header length
* UTF-8 JSON header: ``{"config_hash": str, "rng_seed": int,
  "records": [{"name": str, "shape": [int, ...]}, ...]}`` with records
  sorted by name and keys sorted
* the records' raw data, concatenated in record order as row-major
  little-endian float64

Arrays are stored under dotted names; trainable parameters and auxiliary
arrays (e.g. normalization statistics) share the same namespace.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .exceptions import ContractError

MAGIC = b"HLAGCKP1"


def save_checkpoint(
    path: str | Path,
    arrays: dict[str, np.ndarray],
    rng_seed: int,
    config_hash: str,
) -> None:
    names = sorted(arrays)
    header = {
        "config_hash": config_hash,
        "rng_seed": int(rng_seed),
        "records": [{"name": n, "shape": list(arrays[n].shape)} for n in names],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for name in names:
            fh.write(np.ascontiguousarray(arrays[name], dtype="<f8").tobytes())


def load_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], int, str]:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MAGIC:
            raise ContractError(f"not a checkpoint file: {path}")
        (header_len,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(header_len).decode("utf-8"))
        arrays: dict[str, np.ndarray] = {}
        for record in header["records"]:
            shape = tuple(record["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = fh.read(count * 8)
            if len(raw) != count * 8:
                raise ContractError(f"truncated checkpoint record '{record['name']}'")
            arrays[record["name"]] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
        trailing = fh.read(1)
        if trailing:
            raise ContractError(f"trailing bytes in checkpoint: {path}")
    return arrays, int(header["rng_seed"]), str(header["config_hash"])
