"""Binary checkpoint: magic 'GRAD', version, JSON header with an entry table,
then raw little-endian float64 tensor payloads. Round-trips bitwise."""

from __future__ import annotations

import json
import os
import struct
import tempfile
from dataclasses import asdict, dataclass, field

import numpy as np

from .config import RunConfig
from .decoder import DecoderParams, LatentStore, init_decoder_params
from .flow import FlowParams, init_flow_params
from .tensorcore.optim import AdamState

__all__ = ["Checkpoint", "CheckpointError", "save_checkpoint", "load_checkpoint"]

MAGIC = b"GRAD"
VERSION = 1


class CheckpointError(RuntimeError):
    pass


@dataclass
class Checkpoint:
    """Everything needed to resume training or to sample: config snapshot,
    model tensors, optimizer moments, latent store, and progress counters."""

    config: RunConfig
    decoder: DecoderParams
    store: LatentStore
    flow: FlowParams | None = None
    decoder_adam: AdamState = field(default_factory=AdamState)
    flow_adam: AdamState = field(default_factory=AdamState)
    decoder_epochs_done: int = 0
    flow_epochs_done: int = 0
    train_sizes: list[int] = field(default_factory=list)

    def named_tensors(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for name, t in self.decoder.tensors():
            out[f"decoder/{name}"] = t.data
        for key, state in (("decoder", self.decoder_adam), ("flow", self.flow_adam)):
            for kind, table in (("m", state.m), ("v", state.v)):
                for name, arr in table.items():
                    out[f"adam-{kind}/{key}/{name}"] = arr
        for i, z in enumerate(self.store.codes):
            out[f"latent/{i}"] = z
        if self.flow is not None:
            for name, t in self.flow.tensors():
                out[f"flow/{name}"] = t.data
        return out


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    tensors = ckpt.named_tensors()
    entries = []
    offset = 0
    blobs = []
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype="<f8")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blobs.append(arr.tobytes())
        offset += arr.nbytes
    header = {
        "config": asdict(ckpt.config),
        "seed": ckpt.config.seed,
        "mode": ckpt.config.mode,
        "decoder_epochs_done": ckpt.decoder_epochs_done,
        "flow_epochs_done": ckpt.flow_epochs_done,
        "decoder_adam_step": ckpt.decoder_adam.step,
        "flow_adam_step": ckpt.flow_adam.step,
        "has_flow": ckpt.flow is not None,
        "flow_initialized": bool(ckpt.flow.initialized) if ckpt.flow is not None else False,
        "n_latents": len(ckpt.store.codes),
        "train_sizes": list(map(int, ckpt.train_sizes)),
        "entries": entries,
    }
    raw = json.dumps(header, sort_keys=True).encode("utf-8")
    path = os.fspath(path)
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=".ckpt")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(MAGIC)
            f.write(struct.pack("<I", VERSION))
            f.write(struct.pack("<Q", len(raw)))
            f.write(raw)
            for blob in blobs:
                f.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as f:
        if f.read(4) != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
        (version,) = struct.unpack("<I", f.read(4))
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
        (hlen,) = struct.unpack("<Q", f.read(8))
        header = json.loads(f.read(hlen).decode("utf-8"))
        payload = f.read()

    def read_entry(entry) -> np.ndarray:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        arr = np.frombuffer(payload, dtype="<f8", count=count, offset=start)
        return arr.reshape(shape).astype(np.float64)

    table = {e["name"]: read_entry(e) for e in header["entries"]}
    cfg = RunConfig(**header["config"]).validate()

    decoder = init_decoder_params(cfg, np.random.default_rng(0))
    _fill("decoder", decoder.tensors(), table, path)
    store = LatentStore([table[f"latent/{i}"] for i in range(header["n_latents"])])
    flow = None
    if header["has_flow"]:
        flow = init_flow_params(cfg, np.random.default_rng(0))
        _fill("flow", flow.tensors(), table, path)
        flow.initialized = header["flow_initialized"]
    decoder_adam = _load_adam(table, "decoder", header["decoder_adam_step"])
    flow_adam = _load_adam(table, "flow", header["flow_adam_step"])
    return Checkpoint(
        config=cfg,
        decoder=decoder,
        store=store,
        flow=flow,
        decoder_adam=decoder_adam,
        flow_adam=flow_adam,
        decoder_epochs_done=header["decoder_epochs_done"],
        flow_epochs_done=header["flow_epochs_done"],
        train_sizes=list(header["train_sizes"]),
    )


def _fill(prefix: str, named, table: dict[str, np.ndarray], path) -> None:
    for name, t in named:
        key = f"{prefix}/{name}"
        if key not in table:
            raise CheckpointError(f"{path}: missing tensor {key}")
        arr = table[key]
        if arr.shape != t.data.shape:
            raise CheckpointError(
                f"{path}: tensor {key} has shape {arr.shape}, expected {t.data.shape} "
                "(config/schema mismatch)"
            )
        t.data = arr


def _load_adam(table: dict[str, np.ndarray], key: str, step: int) -> AdamState:
    state = AdamState(step=step)
    pm = f"adam-m/{key}/"
    pv = f"adam-v/{key}/"
    for name, arr in table.items():
        if name.startswith(pm):
            state.m[name[len(pm):]] = arr.copy()
        elif name.startswith(pv):
            state.v[name[len(pv):]] = arr.copy()
    return state
