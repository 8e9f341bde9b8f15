"""Shared checkpoint format: JSON manifest + little-endian f32 blob."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch

FORMAT_VERSION = "1"


def save_tensors(path_prefix: str | Path, state: dict, config: dict) -> None:
    """Write `<prefix>.json` (manifest) and `<prefix>.bin` (row-major f32 blob)."""
    prefix = Path(path_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    tensors = []
    chunks = []
    offset = 0
    for name in sorted(state):
        arr = state[name].detach().numpy().astype("<f4") if isinstance(state[name], torch.Tensor) else np.asarray(state[name], dtype="<f4")
        raw = np.ascontiguousarray(arr).tobytes()
        tensors.append({"name": name, "shape": list(arr.shape), "offset": offset})
        chunks.append(raw)
        offset += len(raw)
    manifest = {
        "format_version": FORMAT_VERSION,
        "dtype": "f32",
        "tensors": tensors,
        "config": config,
    }
    prefix.with_suffix(".json").write_text(json.dumps(manifest, indent=1), encoding="utf-8")
    prefix.with_suffix(".bin").write_bytes(b"".join(chunks))


def load_tensors(path_prefix: str | Path) -> tuple[dict, dict]:
    """Read a checkpoint back as {name: float32 ndarray} plus its config echo."""
    prefix = Path(path_prefix)
    manifest = json.loads(prefix.with_suffix(".json").read_text(encoding="utf-8"))
    if manifest.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint version {manifest.get('format_version')!r}")
    blob = prefix.with_suffix(".bin").read_bytes()
    state = {}
    for entry in manifest["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=entry["offset"])
        state[entry["name"]] = arr.reshape(shape).copy()
    return state, manifest["config"]


def load_into_module(module: torch.nn.Module, state: dict) -> None:
    module.load_state_dict({k: torch.from_numpy(v) for k, v in state.items()})
