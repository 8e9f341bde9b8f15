"""Headless simulated studies: quality curves, lineups, and ablations."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .embedding import (
    EmbeddingNet,
    OracleConfig,
    embed_many,
    oracle_similarity,
)
from .generator import FaceGenerator, FaceParams
from .reconstruction import (
    MAX_ITERS,
    DifferentiableDecoder,
    ReconstructionNet,
    TrainConfig,
    baseline_rank_weighted,
    oracle_ranked_latents,
    train,
)

REPORT_VERSION = "1"


@dataclass
class StudyReport:
    seed: int
    n_targets: int
    per_target_similarity: list  # similarity at the stopped iteration
    final_similarity: list  # similarity at the full 20 iterations
    baseline_similarity: list  # rank-weighted aggregator on the same sessions
    curve_similarity: list  # mean similarity per iteration count (len 20)
    curve_latent_change: list  # mean abs latent change vs previous iteration (len 20, first 0)
    stop_iterations: list  # early-stop iteration per target
    ir: float | None = None
    top3_rate: float | None = None
    ablation_curves: dict = field(default_factory=dict)  # label -> [[step, val_sim], ...]

    @property
    def mean_similarity(self) -> float:
        return float(np.mean(self.per_target_similarity))

    @property
    def std_similarity(self) -> float:
        return float(np.std(self.per_target_similarity))

    def summary(self) -> dict:
        return {
            "format_version": REPORT_VERSION,
            "seed": self.seed,
            "n_targets": self.n_targets,
            "mean_similarity": self.mean_similarity,
            "std_similarity": self.std_similarity,
            "mean_final_similarity": float(np.mean(self.final_similarity)),
            "mean_baseline_similarity": float(np.mean(self.baseline_similarity)),
            "mean_stop_iteration": float(np.mean(self.stop_iterations)),
            "ir": self.ir,
            "top3_rate": self.top3_rate,
        }


def run_simulated_study(
    n_targets: int,
    generator: FaceGenerator,
    pools: dict,
    net: ReconstructionNet,
    embedder: EmbeddingNet,
    oracle_cfg: OracleConfig,
    alpha: float,
    seed: int = 0,
) -> StudyReport:
    """Simulate full sessions with noisy-oracle raters and measure quality."""
    if n_targets <= 0:
        raise ValueError("n_targets must be positive")
    rng = np.random.default_rng(seed)
    targets = np.stack([generator.sample_latent(rng) for _ in range(n_targets)])
    ranked = oracle_ranked_latents(generator, pools, targets, oracle_cfg, rng)
    decoder = DifferentiableDecoder(generator)
    targets_t = torch.tensor(targets, dtype=torch.float32)
    with torch.no_grad():
        e_tgt = embedder(decoder(targets_t))
        sims = np.zeros((n_targets, MAX_ITERS))
        recs = []
        for i in range(1, MAX_ITERS + 1):
            w_i = net(ranked[:, :i])
            recs.append(w_i)
            sims[:, i - 1] = torch.sum(embedder(decoder(w_i)) * e_tgt, dim=-1).numpy()
    changes = np.zeros((n_targets, MAX_ITERS))
    for i in range(1, MAX_ITERS):
        changes[:, i] = torch.mean(torch.abs(recs[i] - recs[i - 1]), dim=-1).numpy()

    stop_iters = []
    stopped_sims = []
    for b in range(n_targets):
        stop = MAX_ITERS
        for i in range(2, MAX_ITERS + 1):
            if changes[b, i - 1] < alpha:
                stop = i
                break
        stop_iters.append(stop)
        stopped_sims.append(float(sims[b, stop - 1]))

    baseline_sims = []
    with torch.no_grad():
        for b in range(n_targets):
            est = np.mean(
                [(np.arange(6, 0, -1) / 21.0) @ it for it in ranked[b].numpy()], axis=0
            )
            e_b = embedder(decoder(torch.tensor(est, dtype=torch.float32).unsqueeze(0)))
            baseline_sims.append(float(torch.sum(e_b[0] * e_tgt[b])))

    return StudyReport(
        seed=seed,
        n_targets=n_targets,
        per_target_similarity=stopped_sims,
        final_similarity=sims[:, -1].tolist(),
        baseline_similarity=baseline_sims,
        curve_similarity=sims.mean(axis=0).tolist(),
        curve_latent_change=changes.mean(axis=0).tolist(),
        stop_iterations=stop_iters,
    )


# -- lineups -------------------------------------------------------------------


@dataclass
class Lineup:
    target: FaceParams
    candidates: list  # 4 FaceParams, target included
    target_index: int
    neighbor_distances: list


def build_lineup(
    target: FaceParams,
    pool: list[FaceParams],
    embedder: EmbeddingNet,
    rng: np.random.Generator,
) -> Lineup:
    """Target plus its three nearest pool faces by embedding L2 distance."""
    if len(pool) < 3:
        raise ValueError("pool must contain at least 3 faces")
    emb = embed_many(embedder, [target] + list(pool))
    dists = np.linalg.norm(emb[1:] - emb[0], axis=1)
    nearest = np.argsort(dists, kind="stable")[:3]
    candidates = [target] + [pool[k] for k in nearest]
    order = rng.permutation(4)
    return Lineup(
        target=target,
        candidates=[candidates[k] for k in order],
        target_index=int(np.where(order == 0)[0][0]),
        neighbor_distances=dists[nearest].tolist(),
    )


def identification_rate(votes: list[tuple[list, int]]) -> float:
    """Percentage of votes placing the true target at rank one.

    Each vote is (candidate ranking best-first, index of the true target).
    """
    if not votes:
        raise ValueError("votes must be nonempty")
    hits = sum(1 for order, target_idx in votes if order[0] == target_idx)
    return 100.0 * hits / len(votes)


def top_k_rate(votes: list[tuple[list, int]], k: int = 3) -> float:
    if not votes:
        raise ValueError("votes must be nonempty")
    hits = sum(1 for order, target_idx in votes if target_idx in list(order[:k]))
    return 100.0 * hits / len(votes)


def _rater_vote(
    reconstruction: FaceParams,
    lineup: Lineup,
    oracle_cfg: OracleConfig,
    rng: np.random.Generator,
) -> list[int]:
    scores = np.array([oracle_similarity(reconstruction, c, oracle_cfg) for c in lineup.candidates])
    span = scores.max() - scores.min()
    scores = (scores - scores.min()) / span if span > 0 else np.zeros_like(scores)
    noisy = scores + rng.uniform(-oracle_cfg.noise, oracle_cfg.noise, size=len(scores))
    return np.argsort(-noisy, kind="stable").tolist()


def run_lineup_study(
    n_lineups: int,
    pool_size: int,
    votes_per_lineup: int,
    generator: FaceGenerator,
    pools: dict,
    net: ReconstructionNet | None,
    embedder: EmbeddingNet,
    oracle_cfg: OracleConfig,
    seed: int = 0,
    use_baseline: bool = False,
) -> dict:
    """Simulated lineup identification study against reconstructed faces.

    With `net=None` the reconstruction is a random latent (chance control);
    with `use_baseline` the rank-weighted aggregator stands in for the net.
    """
    if n_lineups <= 0 or pool_size < 3 or votes_per_lineup <= 0:
        raise ValueError("invalid study sizes")
    rng = np.random.default_rng(seed)
    votes = []
    pool_faces = [generator.decode_params(generator.sample_latent(rng)) for _ in range(pool_size)]
    for _ in range(n_lineups):
        target_w = generator.sample_latent(rng)
        ranked = oracle_ranked_latents(generator, pools, target_w[None, :], oracle_cfg, rng)
        if net is not None:
            with torch.no_grad():
                rec_w = net(ranked)[0].numpy().astype(float)
        elif use_baseline:
            rec_w = np.mean([(np.arange(6, 0, -1) / 21.0) @ it for it in ranked[0].numpy()], axis=0)
        else:
            rec_w = generator.sample_latent(rng)
        rec_face = generator.decode_params(rec_w)
        target_face = generator.decode_params(target_w)
        lineup = build_lineup(target_face, pool_faces, embedder, rng)
        for _ in range(votes_per_lineup):
            votes.append((_rater_vote(rec_face, lineup, oracle_cfg, rng), lineup.target_index))
    return {
        "ir": identification_rate(votes),
        "top3_rate": top_k_rate(votes, 3),
        "n_votes": len(votes),
    }


# -- ablations -----------------------------------------------------------------

ABLATION_LABELS = ("baseline", "TE", "VI", "NUM")


def ablation_suite(
    base_cfg: TrainConfig,
    generator: FaceGenerator,
    pools: dict,
    base_embedder: EmbeddingNet,
    tuned_embedder: EmbeddingNet,
    oracle_cfg: OracleConfig,
) -> dict:
    """Train the four ablation variants; returns label -> (TrainResult, curve).

    Variants stack cumulatively: baseline (deterministic rater, base
    embeddings, fixed 20 iterations) -> +TE (tuned embeddings) -> +VI
    (variable iterations) -> +NUM (noisy rater; the full training recipe).
    Validation similarity is always measured with the tuned embedder on
    noisy-oracle sessions so the curves are comparable.
    """
    variants = {
        "baseline": {"sigma": 0.0, "variable_iters": False, "embedder": base_embedder},
        "TE": {"sigma": 0.0, "variable_iters": False, "embedder": tuned_embedder},
        "VI": {"sigma": 0.0, "variable_iters": True, "embedder": tuned_embedder},
        "NUM": {"sigma": base_cfg.sigma, "variable_iters": True, "embedder": tuned_embedder},
    }
    results = {}
    for label, v in variants.items():
        cfg = TrainConfig(
            lambda_e=base_cfg.lambda_e,
            alpha=base_cfg.alpha,
            lr=base_cfg.lr,
            batch_size=base_cfg.batch_size,
            steps=base_cfg.steps,
            n_targets=base_cfg.n_targets,
            sigma=v["sigma"],
            variable_iters=v["variable_iters"],
            n_val_targets=base_cfg.n_val_targets,
            val_every=base_cfg.val_every,
            seed=base_cfg.seed,
            net=base_cfg.net,
        )
        result = train(
            cfg,
            generator,
            pools,
            embedder=v["embedder"],
            oracle_cfg=oracle_cfg,
            val_embedder=tuned_embedder,
        )
        curve = [[step, val_sim] for step, _, _, val_sim in result.log]
        results[label] = (result, curve)
    return results


# -- export --------------------------------------------------------------------


def export_report(report: StudyReport, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    curves = ["iteration,mean_similarity,mean_latent_change"]
    for i in range(MAX_ITERS):
        curves.append(f"{i + 1},{report.curve_similarity[i]:.10g},{report.curve_latent_change[i]:.10g}")
    p = out / "curves.csv"
    p.write_text("\n".join(curves) + "\n", encoding="utf-8")
    written.append(p)

    rows = ["target,similarity_at_stop,similarity_at_20,baseline_similarity,stop_iteration"]
    for b in range(report.n_targets):
        rows.append(
            f"{b},{report.per_target_similarity[b]:.10g},{report.final_similarity[b]:.10g},"
            f"{report.baseline_similarity[b]:.10g},{report.stop_iterations[b]}"
        )
    p = out / "per_target.csv"
    p.write_text("\n".join(rows) + "\n", encoding="utf-8")
    written.append(p)

    if report.ablation_curves:
        rows = ["label,step,val_embedding_similarity"]
        for label, curve in sorted(report.ablation_curves.items()):
            for step, sim in curve:
                rows.append(f"{label},{step},{sim:.10g}")
        p = out / "ablation_curves.csv"
        p.write_text("\n".join(rows) + "\n", encoding="utf-8")
        written.append(p)

    p = out / "summary.json"
    p.write_text(json.dumps(report.summary(), indent=1, sort_keys=True), encoding="utf-8")
    written.append(p)
    return written
