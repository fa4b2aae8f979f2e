"""Self-describing checkpoint container.

Layout: magic bytes ``SSLSEQ01``, little-endian uint64 header length, JSON
header (kind, network spec, tensor declarations, metadata), then raw
little-endian float64 blobs in declared order.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from stressseq.nn.model import NetworkSpec, SequenceClassifier

MAGIC = b"SSLSEQ01"
OP_VERSION = 1


@dataclass
class Checkpoint:
    kind: str  # "classifier" or "autoencoder"
    network: dict
    params: dict
    state: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def network_spec(self) -> NetworkSpec:
        return NetworkSpec.from_dict(self.network)

    def to_classifier(self) -> SequenceClassifier:
        if self.kind != "classifier":
            raise ValueError(f"checkpoint holds a {self.kind}, not a classifier")
        spec = self.network_spec()
        return SequenceClassifier(
            spec,
            {k: v.copy() for k, v in self.params.items()},
            {k: v.copy() for k, v in self.state.items()},
        )


def save_checkpoint(path, checkpoint: Checkpoint) -> None:
    tensors = []
    blobs = []
    for group, kind in ((checkpoint.params, "param"), (checkpoint.state, "state")):
        for name in sorted(group):
            arr = np.ascontiguousarray(group[name], dtype="<f8")
            tensors.append({"name": name, "shape": list(arr.shape), "kind": kind})
            blobs.append(arr.tobytes())
    header = {
        "op_version": OP_VERSION,
        "kind": checkpoint.kind,
        "network": checkpoint.network,
        "tensors": tensors,
        "meta": checkpoint.meta,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path) -> Checkpoint:
    data = Path(path).read_bytes()
    if data[: len(MAGIC)] != MAGIC:
        raise ValueError(f"{path} is not a checkpoint (bad magic bytes)")
    offset = len(MAGIC)
    (header_len,) = struct.unpack_from("<Q", data, offset)
    offset += 8
    header = json.loads(data[offset : offset + header_len].decode("utf-8"))
    offset += header_len
    if header.get("op_version") != OP_VERSION:
        raise ValueError(f"unsupported checkpoint op_version {header.get('op_version')}")
    params: dict = {}
    state: dict = {}
    for decl in header["tensors"]:
        shape = tuple(decl["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(shape)
        offset += count * 8
        target = params if decl["kind"] == "param" else state
        target[decl["name"]] = arr.astype(np.float64)
    return Checkpoint(
        kind=header["kind"],
        network=header["network"],
        params=params,
        state=state,
        meta=header.get("meta", {}),
    )
