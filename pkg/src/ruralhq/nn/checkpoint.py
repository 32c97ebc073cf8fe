"""Binary checkpoint format.

Layout: magic bytes ``RGQM``, one version byte, a little-endian uint32
manifest length, the UTF-8 JSON manifest (network spec plus ordered tensor
names and shapes), then every tensor as raw little-endian float32 in
manifest order.
"""

from __future__ import annotations

import json
import os
import struct

import numpy as np

from ..errors import CorruptCheckpoint, IoFailure
from .network import DenseScoreNet, NetworkSpec, Parameters

MAGIC = b"RGQM"
VERSION = 1


def save_checkpoint(params: Parameters, spec: NetworkSpec, path: str | os.PathLike) -> None:
    manifest = {
        "spec": spec.to_json_dict(),
        "tensors": [{"name": n, "shape": list(t.shape)} for n, t in params.items()],
    }
    blob = json.dumps(manifest, ensure_ascii=False).encode("utf-8")
    try:
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("B", VERSION))
            fh.write(struct.pack("<I", len(blob)))
            fh.write(blob)
            for _, tensor in params.items():
                fh.write(np.ascontiguousarray(tensor, dtype="<f4").tobytes())
    except OSError as exc:
        raise IoFailure(f"cannot write checkpoint {os.fspath(path)!r}: {exc}") from exc


def load_checkpoint(path: str | os.PathLike) -> tuple[NetworkSpec, Parameters]:
    """Read a checkpoint back; weights come out float32, bit-identical to what was saved."""
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read checkpoint {os.fspath(path)!r}: {exc}") from exc

    if len(data) < len(MAGIC) + 5 or data[: len(MAGIC)] != MAGIC:
        raise CorruptCheckpoint("bad magic bytes")
    pos = len(MAGIC)
    version = data[pos]
    pos += 1
    if version != VERSION:
        raise CorruptCheckpoint(f"unsupported checkpoint version {version}")
    (manifest_len,) = struct.unpack_from("<I", data, pos)
    pos += 4
    if pos + manifest_len > len(data):
        raise CorruptCheckpoint("truncated manifest")
    try:
        manifest = json.loads(data[pos : pos + manifest_len].decode("utf-8"))
        spec = NetworkSpec.from_json_dict(manifest["spec"])
        declared = [(t["name"], tuple(int(s) for s in t["shape"])) for t in manifest["tensors"]]
    except (ValueError, KeyError, TypeError) as exc:
        raise CorruptCheckpoint(f"unreadable manifest: {exc}") from exc
    pos += manifest_len

    expected = DenseScoreNet(spec).tensor_shapes()
    if declared != list(expected.items()):
        raise CorruptCheckpoint("manifest tensors do not match the declared architecture")

    n_floats = sum(int(np.prod(shape)) for _, shape in declared)
    if len(data) - pos != 4 * n_floats:
        raise CorruptCheckpoint(
            f"weight blob holds {len(data) - pos} bytes, manifest declares {4 * n_floats}"
        )
    flat = np.frombuffer(data, dtype="<f4", count=n_floats, offset=pos)
    tensors: dict[str, np.ndarray] = {}
    cursor = 0
    for name, shape in declared:
        size = int(np.prod(shape))
        tensors[name] = flat[cursor : cursor + size].reshape(shape).copy()
        cursor += size
    return spec, Parameters(spec, tensors)
