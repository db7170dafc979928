"""Named-array container used for checkpoints and activation dumps.

Layout::

    8 bytes   magic  b"VRXARR01"
    8 bytes   header length N, unsigned little-endian
    N bytes   UTF-8 JSON header (sorted keys):
                {"format_version": 1, "meta": {...},
                 "arrays": [{"name", "shape", "offset", "nbytes"}, ...]}
    payload   arrays back to back as little-endian float64, C order

Offsets are relative to the start of the payload.  Writing is
deterministic: the same arrays and metadata give identical bytes.
"""

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import CheckpointError

MAGIC = b"VRXARR01"
FORMAT_VERSION = 1


def dumps(arrays, meta=None):
    index = []
    blobs = []
    offset = 0
    for name, arr in arrays.items():
        data = np.asarray(arr, dtype="<f8")
        # tobytes() is C order; ascontiguousarray would promote 0-d to 1-d
        raw = data.tobytes(order="C")
        index.append({"name": name, "shape": list(data.shape), "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    header = {"format_version": FORMAT_VERSION, "meta": meta or {}, "arrays": index}
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return b"".join([MAGIC, struct.pack("<Q", len(hbytes)), hbytes, *blobs])


def loads(buf):
    if buf[:8] != MAGIC:
        raise CheckpointError("not an array container (bad magic)")
    (hlen,) = struct.unpack("<Q", buf[8:16])
    try:
        header = json.loads(buf[16 : 16 + hlen].decode("utf-8"))
    except ValueError as exc:
        raise CheckpointError(f"corrupt container header: {exc}") from None
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported container version {header.get('format_version')}")
    base = 16 + hlen
    arrays = {}
    for item in header["arrays"]:
        start = base + item["offset"]
        raw = buf[start : start + item["nbytes"]]
        if len(raw) != item["nbytes"]:
            raise CheckpointError(f"truncated array {item['name']}")
        arrays[item["name"]] = np.frombuffer(raw, dtype="<f8").reshape(item["shape"]).astype(np.float64)
    return header["meta"], arrays


def save(path, arrays, meta=None):
    Path(path).write_bytes(dumps(arrays, meta))


def load(path):
    return loads(Path(path).read_bytes())
