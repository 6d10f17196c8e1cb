"""Versioned binary checkpoints.

Layout::

    magic   8 bytes  b"SKGCKPT\\0"
    version u16 LE
    hlen    u32 LE   length of the JSON header
    header  hlen bytes UTF-8 JSON: shapes, dtype, array table, metadata
    payload raw little-endian arrays in header order
    crc32   u32 LE   over everything before it
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from skillgraph.learner.networks import PolicyParams
from skillgraph.learner.ppo import RunningNormalizer

MAGIC = b"SKGCKPT\0"
VERSION = 1


class CheckpointError(ValueError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


def _le(a: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=a.dtype.newbyteorder("<"))


def save_checkpoint(params: PolicyParams, path, normalizer: RunningNormalizer | None = None,
                    metadata: dict | None = None) -> Path:
    arrays = {"theta": params.theta}
    if normalizer is not None:
        arrays["obs_mean"] = normalizer.mean
        arrays["obs_var"] = normalizer.var
    table = [{"name": k, "dtype": _le(v).dtype.str, "shape": list(v.shape)} for k, v in arrays.items()]
    header = {
        "obs_dim": params.obs_dim,
        "act_dim": params.act_dim,
        "hidden": list(params.hidden),
        "arrays": table,
        "normalizer": None if normalizer is None else {
            "count": normalizer.count, "clip": normalizer.clip,
        },
        "metadata": metadata or {},
    }
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    body = MAGIC + struct.pack("<HI", VERSION, len(hbytes)) + hbytes
    body += b"".join(_le(v).tobytes() for v in arrays.values())
    body += struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(body)
    return path


def load_checkpoint(path) -> tuple[PolicyParams, RunningNormalizer | None, dict]:
    """Inverse of :func:`save_checkpoint`; returns params, normalizer and metadata."""
    data = Path(path).read_bytes()
    if len(data) < len(MAGIC) + 6 + 4 or data[:len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint or file is truncated")
    version, hlen = struct.unpack_from("<HI", data, len(MAGIC))
    if version != VERSION:
        raise CheckpointVersionError(f"{path}: checkpoint version {version}, expected {VERSION}")
    (crc,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(data[:-4]) & 0xFFFFFFFF != crc:
        raise CheckpointError(f"{path}: checksum mismatch (corrupt or truncated file)")
    pos = len(MAGIC) + 6
    try:
        header = json.loads(data[pos:pos + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: unreadable header") from exc
    pos += hlen
    arrays = {}
    for entry in header["arrays"]:
        dt = np.dtype(entry["dtype"])
        n = int(np.prod(entry["shape"], dtype=np.int64)) * dt.itemsize
        if pos + n > len(data) - 4:
            raise CheckpointError(f"{path}: payload shorter than header declares")
        arrays[entry["name"]] = np.frombuffer(data, dtype=dt, count=n // dt.itemsize, offset=pos).reshape(
            entry["shape"]).astype(dt.newbyteorder("="))
        pos += n
    params = PolicyParams(header["obs_dim"], header["act_dim"], tuple(header["hidden"]),
                          arrays["theta"].copy())
    norm = None
    if header["normalizer"] is not None:
        norm = RunningNormalizer(params.obs_dim, clip=header["normalizer"]["clip"],
                                 mean=arrays["obs_mean"].copy(), var=arrays["obs_var"].copy(),
                                 count=header["normalizer"]["count"])
    return params, norm, header["metadata"]
