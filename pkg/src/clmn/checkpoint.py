"""Checkpoint I/O: a JSON manifest plus a flat little-endian float64 blob."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import ParseError

FORMAT_VERSION = 1
MANIFEST = "manifest.json"
BLOB = "params.bin"


def save_checkpoint(directory, params: Mapping[str, np.ndarray], meta: dict | None = None) -> Path:
    """Write ``params`` (name -> array) in name order; returns the directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    offset = 0
    chunks = []
    for name in sorted(params):
        arr = np.array(params[name], dtype="<f8", order="C")
        raw = arr.tobytes(order="C")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset, "nbytes": len(raw)})
        chunks.append(raw)
        offset += len(raw)
    manifest = {"format_version": FORMAT_VERSION, "dtype": "float64-le", "blob": BLOB,
                "total_bytes": offset, "params": entries, "meta": meta or {}}
    (directory / BLOB).write_bytes(b"".join(chunks))
    (directory / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return directory


def load_checkpoint(directory) -> tuple[dict[str, np.ndarray], dict]:
    directory = Path(directory)
    try:
        manifest = json.loads((directory / MANIFEST).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ParseError(f"cannot read checkpoint manifest in {directory}: {e}") from None
    if manifest.get("format_version") != FORMAT_VERSION:
        raise ParseError(f"unsupported checkpoint format_version {manifest.get('format_version')!r}")
    blob = (directory / manifest.get("blob", BLOB)).read_bytes()
    if len(blob) != manifest["total_bytes"]:
        raise ParseError(f"checkpoint blob has {len(blob)} bytes, manifest says {manifest['total_bytes']}")
    params = {}
    for e in manifest["params"]:
        raw = blob[e["offset"]:e["offset"] + e["nbytes"]]
        params[e["name"]] = np.frombuffer(raw, dtype="<f8").reshape(tuple(e["shape"])).astype(np.float64)
    return params, manifest.get("meta", {})
