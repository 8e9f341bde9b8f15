"""Repo-wide config and on-disk artifact bundle (pools + checkpoints)."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import checkpoint
from .embedding import (
    EmbeddingNet,
    FinetuneConfig,
    OracleConfig,
    finetune,
    synthesize_oracle_triplets,
)
from .generator import FaceGenerator, GeneratorConfig
from .reconstruction import RecNetConfig, ReconstructionNet, TrainConfig, train

DEFAULT_CONFIG = {
    "generator": {"dim": 32, "mixing_seed": 7313, "squash_gain": 1.5},
    "oracle_noise": 0.22,
    "pools_seed": 123,
    "embedding": {
        "init_seed": 1,
        "n_triplet_sets": 700,
        "finetune": {"margin": 0.1, "lr": 0.001, "batch_size": 32, "epochs": 8, "seed": 2},
    },
    "train": {
        "lambda_e": 1.0,
        "lr": 0.0003,
        "batch_size": 32,
        "steps": 12000,
        "n_targets": 12000,
        "sigma": 0.22,
        "variable_iters": True,
        "n_val_targets": 200,
        "val_every": 500,
        "seed": 0,
        "model_dim": 64,
        "heads": 4,
        "blocks": 2,
    },
    "alpha": 0.05,
}


def load_config(path: str | Path | None) -> dict:
    cfg = json.loads(json.dumps(DEFAULT_CONFIG))  # deep copy
    if path is not None:
        user = json.loads(Path(path).read_text(encoding="utf-8"))
        for key, value in user.items():
            if isinstance(value, dict) and isinstance(cfg.get(key), dict):
                cfg[key].update(value)
            else:
                cfg[key] = value
    return cfg


def train_config_from(cfg: dict, **overrides) -> TrainConfig:
    t = dict(cfg["train"])
    t.update(overrides)
    net = RecNetConfig(
        latent_dim=cfg["generator"]["dim"],
        model_dim=t.pop("model_dim"),
        heads=t.pop("heads"),
        blocks=t.pop("blocks"),
        init_seed=t.get("seed", 0),
    )
    return TrainConfig(net=net, alpha=cfg["alpha"], **t)


@dataclass
class Artifacts:
    """Everything a session engine or study needs, loaded from one directory."""

    config: dict
    generator: FaceGenerator
    pools: dict
    base_embedder: EmbeddingNet
    tuned_embedder: EmbeddingNet | None = None
    recon_net: ReconstructionNet | None = None

    @property
    def oracle_cfg(self) -> OracleConfig:
        return OracleConfig(noise=self.config["oracle_noise"])

    @property
    def alpha(self) -> float:
        return self.config["alpha"]

    @property
    def embedder(self) -> EmbeddingNet:
        return self.tuned_embedder or self.base_embedder


def build_base(cfg: dict, out: str | Path) -> Artifacts:
    """Generator, pools, and the untuned embedding net; persists to `out`."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(cfg, indent=1, sort_keys=True), encoding="utf-8")
    generator = FaceGenerator(GeneratorConfig.from_dict(cfg["generator"]))
    pools_path = out / "pools.json"
    if pools_path.exists():
        pools = generator.load_pools(pools_path)
    else:
        pools = generator.build_aux_pools(np.random.default_rng(cfg["pools_seed"]))
        generator.save_pools(pools, pools_path)
    base = EmbeddingNet(init_seed=cfg["embedding"]["init_seed"])
    checkpoint.save_tensors(out / "embedding_base", base.state_dict(), {"init_seed": base.init_seed})
    return Artifacts(config=cfg, generator=generator, pools=pools, base_embedder=base)


def train_embedding(art: Artifacts, out: str | Path) -> EmbeddingNet:
    ecfg = art.config["embedding"]
    triplets = synthesize_oracle_triplets(
        art.generator,
        art.oracle_cfg,
        ecfg["n_triplet_sets"],
        np.random.default_rng(ecfg["finetune"]["seed"]),
    )
    tuned = finetune(art.base_embedder, triplets, FinetuneConfig(**ecfg["finetune"]))
    checkpoint.save_tensors(Path(out) / "embedding_tuned", tuned.state_dict(), ecfg)
    art.tuned_embedder = tuned
    return tuned


def train_reconstructor(art: Artifacts, out: str | Path, **overrides):
    tcfg = train_config_from(art.config, **overrides)
    result = train(tcfg, art.generator, art.pools, art.embedder, oracle_cfg=art.oracle_cfg)
    checkpoint.save_tensors(Path(out) / "reconstructor", result.net.state_dict(), tcfg.to_dict())
    result.write_log(Path(out) / "train_log.csv")
    art.recon_net = result.net
    return result


def load_artifacts(out: str | Path) -> Artifacts:
    out = Path(out)
    cfg = load_config(out / "config.json") if (out / "config.json").exists() else load_config(None)
    generator = FaceGenerator(GeneratorConfig.from_dict(cfg["generator"]))
    pools = generator.load_pools(out / "pools.json")
    base = EmbeddingNet(init_seed=cfg["embedding"]["init_seed"])
    state, _ = checkpoint.load_tensors(out / "embedding_base")
    checkpoint.load_into_module(base, state)
    art = Artifacts(config=cfg, generator=generator, pools=pools, base_embedder=base)
    tuned_path = out / "embedding_tuned.json"
    if tuned_path.exists():
        tuned = EmbeddingNet(init_seed=cfg["embedding"]["init_seed"])
        state, _ = checkpoint.load_tensors(out / "embedding_tuned")
        checkpoint.load_into_module(tuned, state)
        art.tuned_embedder = tuned
    rec_path = out / "reconstructor.json"
    if rec_path.exists():
        state, rec_cfg = checkpoint.load_tensors(out / "reconstructor")
        net = ReconstructionNet(RecNetConfig(**rec_cfg["net"]))
        checkpoint.load_into_module(net, state)
        art.recon_net = net
    return art
