"""Noisy ranking user model and rank-agreement statistics.

A simulated rater scores each candidate face by cosine similarity between
embeddings, perturbs the scores with uniform noise, and ranks by the noisy
scores. Kendall tau over repeated rankings gives the agreement statistics
used to calibrate the noise level against a reference rater population.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import wasserstein_distance

from .embedding import EmbeddingNet, embed_many
from .generator import AUX_SET_SIZE, FaceGenerator, FaceParams


@dataclass(frozen=True)
class UserModelConfig:
    sigma: float = 0.22

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")


def rank_scores(sims: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Rank indices by similarity plus U(-sigma, sigma) noise, best first.

    Ties break towards the lower original index (stable argsort). Accepts a
    batch of score rows ([n, 6]) for Monte Carlo use.
    """
    sims = np.asarray(sims, dtype=float)
    noisy = sims + rng.uniform(-sigma, sigma, size=sims.shape)
    return np.argsort(-noisy, axis=-1, kind="stable")


def rank_faces(
    aux_faces: list[FaceParams],
    target: FaceParams,
    net: EmbeddingNet,
    cfg: UserModelConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """Rank candidates by noisy embedding cosine similarity, best first."""
    emb = embed_many(net, [target] + list(aux_faces))
    sims = emb[1:] @ emb[0]
    return rank_scores(sims, cfg.sigma, rng)


def kendall_tau(r1, r2) -> float:
    """Kendall rank correlation between two rankings of the same items."""
    r1 = np.asarray(r1, dtype=int)
    r2 = np.asarray(r2, dtype=int)
    if r1.shape != r2.shape:
        raise ValueError("rankings must have equal length")
    n = len(r1)
    pos1 = np.empty(n, dtype=int)
    pos2 = np.empty(n, dtype=int)
    pos1[r1] = np.arange(n)
    pos2[r2] = np.arange(n)
    concordant = discordant = 0
    for a in range(n):
        for b in range(a + 1, n):
            s = (pos1[a] - pos1[b]) * (pos2[a] - pos2[b])
            if s > 0:
                concordant += 1
            else:
                discordant += 1
    return (concordant - discordant) / (n * (n - 1) / 2)


def agreement_matrix(pairs: list[tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    """M[i, j]: probability the face ranked i by rater one gets rank j by rater two."""
    if not pairs:
        raise ValueError("need at least one ranking pair")
    m = np.zeros((AUX_SET_SIZE, AUX_SET_SIZE))
    for r1, r2 in pairs:
        r1 = np.asarray(r1, dtype=int)
        r2 = np.asarray(r2, dtype=int)
        pos2 = np.empty(AUX_SET_SIZE, dtype=int)
        pos2[r2] = np.arange(AUX_SET_SIZE)
        for i in range(AUX_SET_SIZE):
            m[i, pos2[r1[i]]] += 1.0
    return m / len(pairs)


def mean_pairwise_tau(
    generator: FaceGenerator,
    net: EmbeddingNet,
    sigma: float,
    n_samples: int,
    rng: np.random.Generator,
) -> tuple[float, np.ndarray]:
    """Tau between two independent noisy rankings of the same random instance."""
    cfg = UserModelConfig(sigma=sigma)
    samples = np.empty(n_samples)
    for k in range(n_samples):
        target = generator.decode_params(generator.sample_latent(rng))
        faces = [generator.decode_params(generator.sample_latent(rng)) for _ in range(AUX_SET_SIZE)]
        ra = rank_faces(faces, target, net, cfg, rng)
        rb = rank_faces(faces, target, net, cfg, rng)
        samples[k] = kendall_tau(ra, rb)
    return float(samples.mean()), samples


def calibrate_sigma(
    reference_tau_samples: np.ndarray,
    grid: list[float],
    n_samples: int,
    generator: FaceGenerator,
    net: EmbeddingNet,
    rng: np.random.Generator,
) -> float:
    """Grid sigma whose model-model tau distribution is W1-closest to the reference.

    Ties resolve to the smaller sigma.
    """
    reference_tau_samples = np.asarray(reference_tau_samples, dtype=float)
    if reference_tau_samples.size == 0 or not grid:
        raise ValueError("reference samples and grid must be nonempty")
    best_sigma, best_dist = None, np.inf
    for sigma in sorted(grid):
        _, samples = mean_pairwise_tau(generator, net, sigma, n_samples, rng)
        dist = wasserstein_distance(samples, reference_tau_samples)
        if dist < best_dist:
            best_sigma, best_dist = sigma, dist
    return best_sigma


def export_matrix_csv(matrix: np.ndarray, path: str | Path) -> None:
    header = ",".join(f"rank_{j}" for j in range(matrix.shape[1]))
    rows = [",".join(f"{v:.10g}" for v in row) for row in matrix]
    Path(path).write_text(header + "\n" + "\n".join(rows) + "\n", encoding="utf-8")


def export_tau_csv(samples: np.ndarray, path: str | Path) -> None:
    rows = "\n".join(f"{v:.10g}" for v in samples)
    Path(path).write_text("tau\n" + rows + "\n", encoding="utf-8")
