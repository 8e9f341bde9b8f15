"""Face embedding network, perceptual oracle, and triplet fine-tuning.

The embedding net maps the observable face vector (identity + nuisance) to a
unit-norm vector. A freshly initialised net is intentionally "wrong": it has
no reason to ignore nuisance dimensions. Fine-tuning on triplets derived from
noisy oracle rankings teaches it the identity-only similarity structure.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np
import torch

from .generator import (
    AUX_SET_SIZE,
    IDENTITY_FEATURES,
    N_IDENTITY,
    N_NUISANCE,
    FaceGenerator,
    FaceParams,
)

EMBED_DIM = 16
HIDDEN_DIM = 32

# features central to face recognition carry double weight in the oracle
_HEAVY = {"eye_size", "eye_spacing", "eye_height", "nose_width", "nose_length", "mouth_width", "lip_thickness"}
DEFAULT_ORACLE_WEIGHTS = np.array([2.0 if f in _HEAVY else 1.0 for f in IDENTITY_FEATURES])


@dataclass(frozen=True)
class OracleConfig:
    weights: np.ndarray = field(default_factory=lambda: DEFAULT_ORACLE_WEIGHTS.copy())
    noise: float = 0.22  # half-width of the uniform rater noise

    def __post_init__(self):
        if self.weights.shape != (N_IDENTITY,) or np.any(self.weights < 0):
            raise ValueError("oracle weights must be nonnegative, one per identity feature")


class EmbeddingNet(torch.nn.Module):
    """input(P+Q) -> 32 tanh -> 32 tanh -> K -> L2 normalise."""

    def __init__(self, init_seed: int = 0):
        super().__init__()
        self.init_seed = init_seed
        in_dim = N_IDENTITY + N_NUISANCE
        self.fc1 = torch.nn.Linear(in_dim, HIDDEN_DIM)
        self.fc2 = torch.nn.Linear(HIDDEN_DIM, HIDDEN_DIM)
        self.fc3 = torch.nn.Linear(HIDDEN_DIM, EMBED_DIM)
        gen = torch.Generator().manual_seed(init_seed)
        for layer in (self.fc1, self.fc2, self.fc3):
            bound = 1.0 / np.sqrt(layer.in_features)
            with torch.no_grad():
                layer.weight.uniform_(-bound, bound, generator=gen)
                layer.bias.uniform_(-bound, bound, generator=gen)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = torch.tanh(self.fc1(x))
        h = torch.tanh(self.fc2(h))
        e = self.fc3(h)
        return e / torch.linalg.vector_norm(e, dim=-1, keepdim=True)


def embed(net: EmbeddingNet, face: FaceParams) -> np.ndarray:
    """Unit-norm embedding of a single face."""
    return embed_many(net, [face])[0]


def embed_many(net: EmbeddingNet, faces: list[FaceParams]) -> np.ndarray:
    x = torch.tensor(np.stack([f.observable() for f in faces]), dtype=torch.float32)
    with torch.no_grad():
        e = net(x)
    return e.numpy().astype(float)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))


# -- oracle ------------------------------------------------------------------


def oracle_similarity(a: FaceParams, b: FaceParams, cfg: OracleConfig | None = None) -> float:
    """Ground-truth similarity: negative weighted squared identity distance."""
    cfg = cfg or OracleConfig()
    d = a.identity - b.identity
    return float(-np.sum(cfg.weights * d * d))


def oracle_rank(
    target: FaceParams,
    faces: list[FaceParams],
    cfg: OracleConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """Synthetic-rater ranking: noisy normalised oracle scores, best first.

    Scores are min-max normalised within the set so the noise half-width is
    comparable across sets regardless of their spread.
    """
    scores = np.array([oracle_similarity(target, f, cfg) for f in faces])
    span = scores.max() - scores.min()
    if span > 0:
        scores = (scores - scores.min()) / span
    else:
        scores = np.zeros_like(scores)
    noisy = scores + rng.uniform(-cfg.noise, cfg.noise, size=len(faces))
    return np.argsort(-noisy, kind="stable")


# -- triplets ------------------------------------------------------------------


@dataclass(frozen=True)
class Triplet:
    anchor: FaceParams
    positive: FaceParams
    negative: FaceParams


def _check_permutation(order) -> np.ndarray:
    order = np.asarray(order, dtype=int)
    if sorted(order.tolist()) != list(range(AUX_SET_SIZE)):
        raise ValueError(f"ranking must be a permutation of 0..{AUX_SET_SIZE - 1}, got {order.tolist()}")
    return order


def generate_triplets(target: FaceParams, rankings: list) -> list[Triplet]:
    """All 15 ordered pairs per ranked 6-face set, anchored at the target."""
    triplets = []
    for aux, order in rankings:
        order = _check_permutation(order)
        faces = [img.params for img in aux.images]
        for i in range(AUX_SET_SIZE):
            for j in range(i + 1, AUX_SET_SIZE):
                triplets.append(Triplet(anchor=target, positive=faces[order[i]], negative=faces[order[j]]))
    return triplets


def triplet_loss(a: np.ndarray, p: np.ndarray, n: np.ndarray, margin: float) -> float:
    dp = float(np.sum((a - p) ** 2))
    dn = float(np.sum((a - n) ** 2))
    return max(dp - dn + margin, 0.0)


# -- fine-tuning ---------------------------------------------------------------


@dataclass(frozen=True)
class FinetuneConfig:
    margin: float = 0.1
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    batch_size: int = 32
    epochs: int = 5
    seed: int = 0


def _triplet_tensors(triplets: list[Triplet]) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    def stack(faces):
        return torch.tensor(np.stack([f.observable() for f in faces]), dtype=torch.float32)

    return (
        stack([t.anchor for t in triplets]),
        stack([t.positive for t in triplets]),
        stack([t.negative for t in triplets]),
    )


def batch_triplet_loss(net: EmbeddingNet, a: torch.Tensor, p: torch.Tensor, n: torch.Tensor, margin: float) -> torch.Tensor:
    ea, ep, en = net(a), net(p), net(n)
    dp = torch.sum((ea - ep) ** 2, dim=-1)
    dn = torch.sum((ea - en) ** 2, dim=-1)
    return torch.clamp(dp - dn + margin, min=0.0).mean()


def mean_triplet_loss(net: EmbeddingNet, triplets: list[Triplet], margin: float = 0.1) -> float:
    a, p, n = _triplet_tensors(triplets)
    with torch.no_grad():
        return float(batch_triplet_loss(net, a, p, n, margin))


def satisfaction_rate(net: EmbeddingNet, triplets: list[Triplet], margin: float = 0.1) -> float:
    """Fraction of triplets with zero loss."""
    a, p, n = _triplet_tensors(triplets)
    with torch.no_grad():
        ea, ep, en = net(a), net(p), net(n)
        dp = torch.sum((ea - ep) ** 2, dim=-1)
        dn = torch.sum((ea - en) ** 2, dim=-1)
        return float((dp - dn + margin <= 0).float().mean())


def finetune(net: EmbeddingNet, triplets: list[Triplet], cfg: FinetuneConfig | None = None) -> EmbeddingNet:
    """Train a copy of the net on the triplets; the input net is untouched.

    Batch order is drawn from the config seed, so the result is a pure
    function of (net weights, triplets, config).
    """
    if not triplets:
        raise ValueError("triplet set must be nonempty")
    cfg = cfg or FinetuneConfig()
    tuned = copy.deepcopy(net)
    a, p, n = _triplet_tensors(triplets)
    opt = torch.optim.Adam(tuned.parameters(), lr=cfg.lr, betas=(cfg.beta1, cfg.beta2))
    rng = np.random.default_rng(cfg.seed)
    for _ in range(cfg.epochs):
        perm = rng.permutation(len(triplets))
        for start in range(0, len(perm), cfg.batch_size):
            idx = torch.from_numpy(perm[start : start + cfg.batch_size])
            loss = batch_triplet_loss(tuned, a[idx], p[idx], n[idx], cfg.margin)
            opt.zero_grad()
            loss.backward()
            opt.step()
    return tuned


def synthesize_oracle_triplets(
    generator: FaceGenerator,
    oracle_cfg: OracleConfig,
    n_sets: int,
    rng: np.random.Generator,
) -> list[Triplet]:
    """Triplets from noisy oracle rankings of random 6-face sets."""
    triplets = []
    for _ in range(n_sets):
        target = generator.decode_params(generator.sample_latent(rng))
        faces = [generator.decode_params(generator.sample_latent(rng)) for _ in range(AUX_SET_SIZE)]
        order = oracle_rank(target, faces, oracle_cfg, rng)
        for i in range(AUX_SET_SIZE):
            for j in range(i + 1, AUX_SET_SIZE):
                triplets.append(Triplet(anchor=target, positive=faces[order[i]], negative=faces[order[j]]))
    return triplets
