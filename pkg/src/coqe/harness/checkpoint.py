"""Checkpoint files: JSON manifest plus raw little-endian parameter payload.

Layout: 8-byte magic, uint32 manifest length, manifest JSON (version,
config hash, step, named parameter index with shapes/dtypes/offsets),
then the concatenated parameter bytes.  Reload reproduces every
parameter bitwise.
"""

import json
import os
import struct

import numpy as np

MAGIC = b"COQECKPT"
VERSION = "coqe-ckpt-1"


class CheckpointError(RuntimeError):
    pass


def save_checkpoint(params, cfg_hash, step, path):
    """Write parameters (dict of Tensors or arrays) in name order."""
    entries = []
    payloads = []
    offset = 0
    for name in sorted(params):
        arr = params[name]
        arr = np.asarray(getattr(arr, "data", arr))
        data = arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes()
        entries.append({
            "name": name,
            "shape": list(arr.shape),
            "dtype": arr.dtype.name,
            "offset": offset,
        })
        payloads.append(data)
        offset += len(data)
    manifest = {
        "version": VERSION,
        "config_hash": cfg_hash,
        "step": int(step),
        "payload_bytes": offset,
        "params": entries,
    }
    blob = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode()
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for data in payloads:
            fh.write(data)
    os.replace(tmp, path)


def load_checkpoint(path, expect_hash=None):
    """Read (manifest, {name: array}); validates structure and hash."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
    pos = len(MAGIC)
    (mlen,) = struct.unpack("<I", raw[pos:pos + 4])
    pos += 4
    try:
        manifest = json.loads(raw[pos:pos + mlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: manifest unreadable: {exc}") from exc
    pos += mlen
    version = manifest.get("version")
    if version != VERSION:
        raise CheckpointError(
            f"{path}: version mismatch: file has {version!r}, "
            f"reader expects {VERSION!r}"
        )
    if expect_hash is not None and manifest.get("config_hash") != expect_hash:
        raise CheckpointError(
            f"{path}: config hash mismatch: file has "
            f"{manifest.get('config_hash')!r}, expected {expect_hash!r}"
        )
    payload = raw[pos:]
    params = {}
    for entry in manifest["params"]:
        dtype = np.dtype(entry["dtype"]).newbyteorder("<")
        nbytes = dtype.itemsize * int(np.prod(entry["shape"], dtype=np.int64))
        start = entry["offset"]
        if start + nbytes > len(payload):
            raise CheckpointError(
                f"{path}: truncated payload: parameter {entry['name']!r} "
                f"needs bytes [{start}, {start + nbytes}) but payload has "
                f"{len(payload)}"
            )
        arr = np.frombuffer(payload[start:start + nbytes], dtype=dtype)
        params[entry["name"]] = (
            arr.astype(dtype.newbyteorder("="), copy=True)
            .reshape(entry["shape"])
        )
    if manifest.get("payload_bytes") != len(payload):
        raise CheckpointError(
            f"{path}: payload length {len(payload)} does not match manifest "
            f"({manifest.get('payload_bytes')})"
        )
    return manifest, params


def restore_model(model, params):
    """Copy loaded arrays into a model's parameters, validating shapes."""
    missing = sorted(set(model.params) - set(params))
    extra = sorted(set(params) - set(model.params))
    if missing or extra:
        raise CheckpointError(
            f"parameter set mismatch: missing {missing}, unexpected {extra}"
        )
    for name, tensor in model.params.items():
        arr = params[name]
        if tuple(arr.shape) != tensor.data.shape:
            raise CheckpointError(
                f"parameter {name!r}: checkpoint shape {arr.shape} vs model "
                f"{tensor.data.shape}"
            )
        tensor.data[...] = arr.astype(tensor.data.dtype, copy=False)
