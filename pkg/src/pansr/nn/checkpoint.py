"""Versioned binary checkpoints.

Layout: 8-byte magic, little-endian uint32 header length, UTF-8 JSON header,
then raw little-endian float32 tensor blobs in header order.  The header holds
the architecture table, the init seed, and a tensor manifest, so a checkpoint
reconstructs its network without any out-of-band information.  Training
history goes to a JSON sidecar next to the binary (`<path>.history.json`).

Weights live in memory as float32, so a save/load cycle is bit-exact.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .network import ArchitectureSpec, LayerSpec, Network

MAGIC = b"PANSRCK1"
FORMAT_VERSION = 1
_BLOB_DTYPE = np.dtype("<f4")


def history_path(path: str | Path) -> Path:
    return Path(str(path) + ".history.json")


def save_checkpoint(net: Network, path: str | Path, history: list[dict] | None = None) -> Path:
    """Write `net` to `path`; returns the written path."""
    path = Path(path)
    tensors = []
    blobs = []
    for idx, name, p, _ in net.param_tensors():
        tensors.append({"layer": idx, "name": name, "shape": list(p.shape)})
        blobs.append(np.ascontiguousarray(p, dtype=_BLOB_DTYPE))
    header = {
        "format": FORMAT_VERSION,
        "architecture": net.spec.name,
        "input_convention": net.spec.input_convention,
        "scale": net.spec.scale,
        "in_channels": net.in_channels,
        "init_seed": net.seed,
        "layers": [ls.to_dict() for ls in net.spec.layers],
        "tensors": tensors,
        "blob_dtype": _BLOB_DTYPE.str,
    }
    raw = json.dumps(header, sort_keys=True).encode("utf-8")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(raw)))
        fh.write(raw)
        for blob in blobs:
            fh.write(blob.tobytes())
    if history is not None:
        history_path(path).write_text(json.dumps(history, indent=1))
    return path


def load_checkpoint(path: str | Path, dtype=np.float32) -> tuple[Network, dict]:
    """Rebuild the network stored at `path`; returns (network, header)."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < len(MAGIC) + 4 or raw[: len(MAGIC)] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint (bad magic)")
    (hlen,) = struct.unpack_from("<I", raw, len(MAGIC))
    hstart = len(MAGIC) + 4
    if hstart + hlen > len(raw):
        raise ValueError(f"{path}: truncated header")
    header = json.loads(raw[hstart : hstart + hlen].decode("utf-8"))
    if header.get("format") != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint format {header.get('format')!r}")

    spec = ArchitectureSpec(
        name=header["architecture"],
        input_convention=header["input_convention"],
        layers=tuple(LayerSpec.from_dict(d) for d in header["layers"]),
        scale=header["scale"],
    )
    net = Network(spec, in_channels=header["in_channels"], dtype=dtype)
    net.seed = header.get("init_seed")

    offset = hstart + hlen
    manifest = header["tensors"]
    built = list(net.param_tensors())
    if len(built) != len(manifest):
        raise ValueError(
            f"{path}: manifest lists {len(manifest)} tensors, architecture has {len(built)}"
        )
    for (idx, name, p, _), entry in zip(built, manifest):
        if entry["layer"] != idx or entry["name"] != name or list(p.shape) != entry["shape"]:
            raise ValueError(
                f"{path}: tensor mismatch at layer {idx} {name!r} "
                f"(manifest says layer {entry['layer']} {entry['name']!r} {entry['shape']})"
            )
        nbytes = int(np.prod(entry["shape"], dtype=np.int64)) * _BLOB_DTYPE.itemsize
        if offset + nbytes > len(raw):
            raise ValueError(f"{path}: truncated tensor data")
        blob = np.frombuffer(raw, dtype=_BLOB_DTYPE, count=p.size, offset=offset)
        p[...] = blob.reshape(p.shape).astype(dtype)
        offset += nbytes
    if offset != len(raw):
        raise ValueError(f"{path}: {len(raw) - offset} trailing bytes after tensor data")
    return net, header


def load_history(path: str | Path) -> list[dict]:
    hp = history_path(path)
    if not hp.exists():
        return []
    return json.loads(hp.read_text())
