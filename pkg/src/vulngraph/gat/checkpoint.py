"""Versioned binary checkpoints.

Layout (little-endian)::

    magic "VGCKPT\\0\\0" | u32 version | u32 len | config JSON
    u32 tensor count, then per tensor: u32 name len | name | u32 ndim | u32 dims... | f64 data
    32-byte SHA-256 of everything before it
"""

from __future__ import annotations

import hashlib
import io
import json
import struct
from dataclasses import asdict

import numpy as np

from .model import ModelConfig, ModelParams, param_shapes

MAGIC = b"VGCKPT\x00\x00"
VERSION = 1


class CheckpointError(ValueError):
    pass


def dumps(params: ModelParams, extra: dict | None = None) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    meta = {"model": asdict(params.config), "extra": extra or {}}
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    buf.write(struct.pack("<II", VERSION, len(blob)))
    buf.write(blob)
    buf.write(struct.pack("<I", len(params.tensors)))
    for name, arr in params.tensors.items():
        nb = name.encode("utf-8")
        buf.write(struct.pack("<I", len(nb)) + nb)
        buf.write(struct.pack("<I", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        buf.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    body = buf.getvalue()
    return body + hashlib.sha256(body).digest()


def loads(data: bytes) -> tuple[ModelParams, dict]:
    if len(data) < len(MAGIC) + 32 or not data.startswith(MAGIC):
        raise CheckpointError("not a checkpoint file")
    body, digest = data[:-32], data[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise CheckpointError("checkpoint checksum mismatch")
    buf = io.BytesIO(body)
    buf.read(len(MAGIC))
    version, blen = struct.unpack("<II", buf.read(8))
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    meta = json.loads(buf.read(blen))
    cfg = ModelConfig(**meta["model"])
    (count,) = struct.unpack("<I", buf.read(4))
    tensors = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<I", buf.read(4))
        name = buf.read(nlen).decode("utf-8")
        (ndim,) = struct.unpack("<I", buf.read(4))
        shape = struct.unpack(f"<{ndim}I", buf.read(4 * ndim))
        size = int(np.prod(shape)) if ndim else 1
        tensors[name] = np.frombuffer(buf.read(8 * size), dtype="<f8").reshape(shape).copy()
    expected = param_shapes(cfg)
    if list(tensors) != list(expected) or any(tensors[k].shape != s for k, s in expected.items()):
        raise CheckpointError("tensor layout does not match the stored model config")
    return ModelParams(cfg, tensors), meta.get("extra", {})


def save(path, params: ModelParams, extra: dict | None = None) -> str:
    """Write a checkpoint and return its SHA-256 hex digest."""
    data = dumps(params, extra)
    with open(path, "wb") as fh:
        fh.write(data)
    return hashlib.sha256(data).hexdigest()


def load(path) -> tuple[ModelParams, dict]:
    with open(path, "rb") as fh:
        return loads(fh.read())


def file_digest(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()
