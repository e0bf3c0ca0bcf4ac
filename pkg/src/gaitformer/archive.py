"""Named-array archive used for checkpoints and windowed datasets.

Layout::

    8 bytes   magic  b"GAITARC1"
    8 bytes   little-endian uint64: manifest length n
    n bytes   UTF-8 JSON manifest {"meta": {...}, "entries": [{"name", "shape", "offset"}]}
    ...       payload: every array as little-endian float64, row-major,
              at ``offset`` bytes from the start of the payload

The manifest is written with sorted keys so identical content gives
identical bytes.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import SchemaError

MAGIC = b"GAITARC1"


def write_archive(path, arrays: dict, meta: dict) -> None:
    entries = []
    blobs = []
    offset = 0
    for name, a in arrays.items():
        data = np.ascontiguousarray(a, dtype="<f8")
        entries.append({"name": name, "shape": list(data.shape), "offset": offset})
        blob = data.tobytes()
        blobs.append(blob)
        offset += len(blob)
    manifest = json.dumps({"meta": meta, "entries": entries}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(manifest)))
        f.write(manifest)
        for blob in blobs:
            f.write(blob)


def read_archive(path) -> tuple[dict, dict]:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise SchemaError(f"{path}: not a gaitformer archive")
    (n,) = struct.unpack("<Q", raw[8:16])
    manifest = json.loads(raw[16 : 16 + n].decode("utf-8"))
    payload = memoryview(raw)[16 + n :]
    arrays = {}
    for e in manifest["entries"]:
        count = int(np.prod(e["shape"], dtype=np.int64))
        start = e["offset"]
        stop = start + 8 * count
        if stop > len(payload):
            raise SchemaError(f"{path}: entry {e['name']!r} runs past the end of the payload")
        arrays[e["name"]] = np.frombuffer(payload[start:stop], dtype="<f8").reshape(e["shape"]).astype(np.float64)
    return arrays, manifest["meta"]
