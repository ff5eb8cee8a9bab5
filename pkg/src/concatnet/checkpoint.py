"""Self-describing binary checkpoint container.

Layout: a 4-byte magic, an 8-byte little-endian header length, a JSON
header (format version, configuration echo, ordered tensor table with
shapes and byte offsets), then the raw little-endian float64 payloads in
table order. Loading reproduces every array bit-exactly.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import DataFormatError

MAGIC = b"CNCK"
FORMAT_VERSION = "1"


def save(
    path: str | Path,
    arrays: Sequence[tuple[str, np.ndarray]],
    config: Mapping,
) -> None:
    """Write named float64 arrays plus a configuration echo."""
    table = []
    offset = 0
    payloads = []
    for name, arr in arrays:
        arr = np.ascontiguousarray(arr, dtype="<f8")
        table.append({"name": name, "shape": list(arr.shape), "offset": offset})
        payloads.append(arr.tobytes())
        offset += arr.nbytes
    header = json.dumps(
        {"format_version": FORMAT_VERSION, "config": dict(config), "tensors": table},
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(len(header).to_bytes(8, "little"))
        fh.write(header)
        for blob in payloads:
            fh.write(blob)


def load(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    """Read a checkpoint; returns (config echo, ordered name->array map)."""
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"checkpoint {path} does not exist")
    raw = path.read_bytes()
    if raw[:4] != MAGIC:
        raise DataFormatError(f"{path} is not a checkpoint file (bad magic)")
    header_len = int.from_bytes(raw[4:12], "little")
    try:
        header = json.loads(raw[12 : 12 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"{path} has a corrupt header: {exc}") from None
    if header.get("format_version") != FORMAT_VERSION:
        raise DataFormatError(
            f"{path} has format version {header.get('format_version')!r}, "
            f"expected {FORMAT_VERSION!r}"
        )
    base = 12 + header_len
    arrays: dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = base + entry["offset"]
        data = np.frombuffer(raw, dtype="<f8", count=count, offset=start)
        arrays[entry["name"]] = data.reshape(shape).copy()
    return header["config"], arrays
