import json

import numpy as np
import pytest
import torch

from faceforge.checkpoint import load_into_module, load_tensors, save_tensors
from faceforge.embedding import EmbeddingNet


def test_round_trip_exact(tmp_path):
    state = {
        "b.weight": np.random.default_rng(0).standard_normal((4, 3)).astype(np.float32),
        "a.bias": np.float32([1.5, -2.25]),
    }
    prefix = tmp_path / "ckpt"
    save_tensors(prefix, state, {"seed": 7})
    loaded, config = load_tensors(prefix)
    assert config == {"seed": 7}
    assert set(loaded) == set(state)
    for k in state:
        assert np.array_equal(loaded[k], state[k])
        assert loaded[k].dtype == np.float32


def test_manifest_layout(tmp_path):
    state = {"z": np.zeros((2, 2), np.float32), "a": np.ones(3, np.float32)}
    prefix = tmp_path / "m"
    save_tensors(prefix, state, {})
    manifest = json.loads((tmp_path / "m.json").read_text())
    assert manifest["format_version"] == "1"
    assert manifest["dtype"] == "f32"
    names = [t["name"] for t in manifest["tensors"]]
    assert names == sorted(names)
    offsets = [t["offset"] for t in manifest["tensors"]]
    assert offsets[0] == 0
    blob = (tmp_path / "m.bin").read_bytes()
    assert len(blob) == 4 * (4 + 3)


def test_load_into_module_round_trip(tmp_path):
    net = EmbeddingNet(init_seed=5)
    state = {k: v.detach().numpy() for k, v in net.state_dict().items()}
    prefix = tmp_path / "emb"
    save_tensors(prefix, state, {"init_seed": 5})
    fresh = EmbeddingNet(init_seed=99)
    loaded, _ = load_tensors(prefix)
    load_into_module(fresh, loaded)
    for p1, p2 in zip(net.parameters(), fresh.parameters()):
        assert torch.equal(p1, p2)


def test_missing_file_raises(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_tensors(tmp_path / "nothing")
