"""Two-stage set-aggregation network over ranked latents, and its training.

Stage one encodes each iteration's six ranked latents (plus a learnable cls
token and sinusoidal positions) with a transformer and reads out the cls.
Stage two runs a second transformer over the per-iteration features (plus a
second cls) and maps the cls to the reconstructed latent. Training simulates
ranking sessions with the noisy user model and optimises a latent MSE minus
an embedding-cosine term, differentiable through the generator decode and
the embedding net.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import torch

from .embedding import EmbeddingNet, OracleConfig, oracle_rank
from .generator import AUX_SET_SIZE, N_IDENTITY, N_NUISANCE, Category, FaceGenerator

MAX_ITERS = 20


@dataclass(frozen=True)
class RecNetConfig:
    latent_dim: int = 32
    model_dim: int = 64
    heads: int = 4
    blocks: int = 2
    init_seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


class DifferentiableDecoder(torch.nn.Module):
    """Torch twin of FaceGenerator.decode_params: latent -> observable vector."""

    def __init__(self, generator: FaceGenerator):
        super().__init__()
        self.register_buffer("mixing", torch.tensor(generator.mixing, dtype=torch.float32))
        self.gain = generator.config.squash_gain

    def forward(self, w: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.gain * (w @ self.mixing.T))


class _Block(torch.nn.Module):
    """Pre-LN transformer block with GELU feed-forward."""

    def __init__(self, dim: int, heads: int):
        super().__init__()
        self.ln1 = torch.nn.LayerNorm(dim)
        self.attn = torch.nn.MultiheadAttention(dim, heads, batch_first=True)
        self.ln2 = torch.nn.LayerNorm(dim)
        self.ff = torch.nn.Sequential(
            torch.nn.Linear(dim, 4 * dim),
            torch.nn.GELU(),
            torch.nn.Linear(4 * dim, dim),
        )

    def forward(self, x: torch.Tensor, key_padding_mask: torch.Tensor | None = None) -> torch.Tensor:
        h = self.ln1(x)
        a, _ = self.attn(h, h, h, key_padding_mask=key_padding_mask, need_weights=False)
        x = x + a
        return x + self.ff(self.ln2(x))


def _sinusoidal(n_pos: int, dim: int) -> torch.Tensor:
    pos = torch.arange(n_pos, dtype=torch.float32).unsqueeze(1)
    div = torch.exp(torch.arange(0, dim, 2, dtype=torch.float32) * (-math.log(10000.0) / dim))
    enc = torch.zeros(n_pos, dim)
    enc[:, 0::2] = torch.sin(pos * div)
    enc[:, 1::2] = torch.cos(pos * div)
    return enc


class ReconstructionNet(torch.nn.Module):
    def __init__(self, config: RecNetConfig | None = None):
        super().__init__()
        self.config = config or RecNetConfig()
        c = self.config
        self.input_proj = torch.nn.Linear(c.latent_dim, c.model_dim)
        self.cls_iter = torch.nn.Parameter(torch.zeros(c.model_dim))
        self.cls_cross = torch.nn.Parameter(torch.zeros(c.model_dim))
        self.iter_blocks = torch.nn.ModuleList(_Block(c.model_dim, c.heads) for _ in range(c.blocks))
        self.siamese = torch.nn.Linear(c.model_dim, c.model_dim)
        self.cross_blocks = torch.nn.ModuleList(_Block(c.model_dim, c.heads) for _ in range(c.blocks))
        self.output = torch.nn.Linear(c.model_dim, c.latent_dim)
        self.register_buffer("pos_iter", _sinusoidal(AUX_SET_SIZE + 1, c.model_dim))
        self.register_buffer("pos_cross", _sinusoidal(MAX_ITERS + 1, c.model_dim))
        self._init_weights(c.init_seed)

    def _init_weights(self, seed: int) -> None:
        gen = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            for name, p in self.named_parameters():
                if name.startswith("cls_"):
                    p.normal_(0.0, 0.02, generator=gen)
                elif p.dim() >= 2:
                    bound = math.sqrt(6.0 / (p.shape[-1] + p.shape[-2]))
                    p.uniform_(-bound, bound, generator=gen)
                elif name.endswith(".bias"):
                    p.zero_()
                else:
                    p.fill_(1.0)  # LayerNorm scales

    def forward(self, ranked: torch.Tensor, valid: torch.Tensor | None = None) -> torch.Tensor:
        """ranked: [B, I, 6, D] latents in rank order; valid: [B, I] bool mask.

        Masked iteration slots are excluded from the cross encoder's keys, so
        a padded pass matches the unpadded one.
        """
        b, n_iter, _, _ = ranked.shape
        x = self.input_proj(ranked)
        cls1 = self.cls_iter.expand(b, n_iter, 1, -1)
        tokens = torch.cat([cls1, x], dim=2) + self.pos_iter
        tokens = tokens.reshape(b * n_iter, AUX_SET_SIZE + 1, -1)
        for block in self.iter_blocks:
            tokens = block(tokens)
        feats = self.siamese(tokens[:, 0].reshape(b, n_iter, -1))
        cls2 = self.cls_cross.expand(b, 1, -1)
        seq = torch.cat([cls2, feats], dim=1) + self.pos_cross[: n_iter + 1]
        if valid is not None:
            pad = torch.cat([torch.zeros(b, 1, dtype=torch.bool, device=seq.device), ~valid], dim=1)
        else:
            pad = None
        for block in self.cross_blocks:
            seq = block(seq, key_padding_mask=pad)
        return self.output(seq[:, 0])


# -- public operations ---------------------------------------------------------


def history_tensor(history: list) -> torch.Tensor:
    """[1, I, 6, D] ranked-latent tensor from a list of (AuxiliarySet, order)."""
    if not history:
        raise ValueError("history must be nonempty")
    stacks = []
    for aux, order in history:
        order = np.asarray(order, dtype=int)
        if sorted(order.tolist()) != list(range(AUX_SET_SIZE)):
            raise ValueError("ranking must be a permutation of 0..5")
        stacks.append(np.stack([aux.latents[k] for k in order]))
    return torch.tensor(np.stack(stacks), dtype=torch.float32).unsqueeze(0)


def reconstruct(net: ReconstructionNet, history: list) -> np.ndarray:
    with torch.no_grad():
        return net(history_tensor(history))[0].numpy().astype(float)


def reconstruction_loss(
    w_rec: torch.Tensor,
    w_target: torch.Tensor,
    decoder: DifferentiableDecoder,
    embedder: EmbeddingNet,
    lambda_e: float = 1.0,
) -> torch.Tensor:
    """Mean latent MSE minus weighted embedding cosine, averaged over the batch."""
    if w_rec.shape != w_target.shape:
        raise ValueError("latent shapes must match")
    mse = torch.mean((w_rec - w_target) ** 2, dim=-1)
    e_rec = embedder(decoder(w_rec))
    e_tgt = embedder(decoder(w_target))
    cos = torch.sum(e_rec * e_tgt, dim=-1)
    return (mse - lambda_e * cos).mean()


def should_stop(w_prev: np.ndarray, w_cur: np.ndarray, alpha: float) -> bool:
    """Stop once the mean absolute latent change drops below alpha."""
    w_prev = np.asarray(w_prev, dtype=float)
    w_cur = np.asarray(w_cur, dtype=float)
    if w_prev.shape != w_cur.shape:
        raise ValueError("latent shapes must match")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    return float(np.mean(np.abs(w_prev - w_cur))) < alpha


_BASELINE_WEIGHTS = np.arange(AUX_SET_SIZE, 0, -1, dtype=float) / 21.0


def baseline_rank_weighted(history: list) -> np.ndarray:
    """Non-learned aggregator: rank-weighted mean of the shown latents."""
    if not history:
        raise ValueError("history must be nonempty")
    acc = None
    for aux, order in history:
        order = np.asarray(order, dtype=int)
        ranked = np.stack([aux.latents[k] for k in order])
        est = _BASELINE_WEIGHTS @ ranked
        acc = est if acc is None else acc + est
    return acc / len(history)


def embedding_similarity(
    w_a: np.ndarray,
    w_b: np.ndarray,
    embedder: EmbeddingNet,
    generator: FaceGenerator,
) -> float:
    """Cosine similarity between the embeddings of the two decoded faces."""
    x = torch.tensor(
        np.stack([generator.decode_params(w).observable() for w in (w_a, w_b)]),
        dtype=torch.float32,
    )
    with torch.no_grad():
        e = embedder(x)
    return float(torch.sum(e[0] * e[1]))


# -- training ------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    lambda_e: float = 1.0
    alpha: float = 0.1
    max_iters: int = MAX_ITERS
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    batch_size: int = 32
    steps: int = 20_000
    n_targets: int = 20_000
    sigma: float = 0.22
    variable_iters: bool = True
    n_val_targets: int = 200
    val_every: int = 500
    seed: int = 0
    net: RecNetConfig = field(default_factory=RecNetConfig)

    def __post_init__(self):
        if self.lambda_e < 0 or self.alpha <= 0 or not 1 <= self.max_iters <= MAX_ITERS:
            raise ValueError("invalid training config")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["net"] = self.net.to_dict()
        return d


class SimulatedRankings:
    """Vectorised ranking simulator over the fixed per-category pools.

    Holds the pool latents and user-model embedding similarities for a batch
    of targets; rankings are drawn on demand so fresh rater noise is used on
    every visit (the user-model loop samples noise per call).
    """

    def __init__(self, generator: FaceGenerator, pools: dict, user_net: EmbeddingNet):
        self.generator = generator
        cats = Category.all()
        self.cat_index = {c.key(): i for i, c in enumerate(cats)}
        lat = np.stack(
            [np.stack([np.stack(s.latents) for s in pools[c.key()]]) for c in cats]
        )  # [4, 20, 6, D]
        self.pool_latents = torch.tensor(lat, dtype=torch.float32)
        obs = np.stack(
            [
                np.stack([np.stack([im.params.observable() for im in s.images]) for s in pools[c.key()]])
                for c in cats
            ]
        )
        with torch.no_grad():
            self.pool_emb = user_net(torch.tensor(obs, dtype=torch.float32))  # [4, 20, 6, K]
        self.user_net = user_net

    def target_sims(self, targets: np.ndarray) -> tuple[torch.Tensor, torch.Tensor]:
        """Cosine similarity of each target to every pool face of its category.

        Returns (sims [n, 20, 6], category index [n]).
        """
        cat_idx = torch.tensor(
            [self.cat_index[self.generator.category_of(w).key()] for w in targets], dtype=torch.long
        )
        obs = np.stack([self.generator.decode_params(w).observable() for w in targets])
        with torch.no_grad():
            e = self.user_net(torch.tensor(obs, dtype=torch.float32))  # [n, K]
        sims = torch.einsum("nk,nisk->nis", e, self.pool_emb[cat_idx])
        return sims, cat_idx

    def ranked_latents(
        self,
        sims: torch.Tensor,
        cat_idx: torch.Tensor,
        sigma: float,
        gen: torch.Generator | None,
    ) -> torch.Tensor:
        """[n, 20, 6, D] pool latents ordered by noisy similarity, best first."""
        if sigma > 0:
            noise = (torch.rand(sims.shape, generator=gen) * 2.0 - 1.0) * sigma
            noisy = sims + noise
        else:
            noisy = sims
        order = torch.argsort(-noisy, dim=-1, stable=True)  # [n, 20, 6]
        lat = self.pool_latents[cat_idx]  # [n, 20, 6, D]
        return torch.gather(lat, 2, order.unsqueeze(-1).expand(-1, -1, -1, lat.shape[-1]))


def oracle_ranked_latents(
    generator: FaceGenerator,
    pools: dict,
    targets: np.ndarray,
    oracle_cfg: OracleConfig,
    rng: np.random.Generator,
) -> torch.Tensor:
    """[n, 20, 6, D] rankings drawn from the noisy-oracle rater (held-out data)."""
    out = []
    for w in targets:
        cat = generator.category_of(w)
        target_face = generator.decode_params(w)
        per_target = []
        for s in pools[cat.key()]:
            order = oracle_rank(target_face, [im.params for im in s.images], oracle_cfg, rng)
            per_target.append(np.stack([s.latents[k] for k in order]))
        out.append(np.stack(per_target))
    return torch.tensor(np.stack(out), dtype=torch.float32)


@dataclass
class TrainResult:
    net: ReconstructionNet
    log: list  # rows of (step, train_loss, val_loss, val_emb_sim)
    best_step: int
    best_val_loss: float

    def write_log(self, path: str | Path) -> None:
        rows = [f"{s},{tl:.8f},{vl:.8f},{ve:.8f}" for s, tl, vl, ve in self.log]
        Path(path).write_text("step,train_loss,val_loss,val_embedding_similarity\n" + "\n".join(rows) + "\n", encoding="utf-8")


def _mean_val_metrics(
    net: ReconstructionNet,
    ranked_val: torch.Tensor,
    val_targets_t: torch.Tensor,
    decoder: DifferentiableDecoder,
    embedder: EmbeddingNet,
    lambda_e: float,
    val_embedder: EmbeddingNet,
) -> tuple[float, float]:
    with torch.no_grad():
        w_rec = net(ranked_val)
        loss = reconstruction_loss(w_rec, val_targets_t, decoder, embedder, lambda_e)
        e_rec = val_embedder(decoder(w_rec))
        e_tgt = val_embedder(decoder(val_targets_t))
        sim = torch.sum(e_rec * e_tgt, dim=-1).mean()
    return float(loss), float(sim)


def train(
    cfg: TrainConfig,
    generator: FaceGenerator,
    pools: dict,
    embedder: EmbeddingNet,
    user_net: EmbeddingNet | None = None,
    oracle_cfg: OracleConfig | None = None,
    val_embedder: EmbeddingNet | None = None,
) -> TrainResult:
    """Train the reconstruction net on simulated ranking sessions.

    `user_net` drives the training-time rater (defaults to `embedder`);
    validation rankings come from the noisy-oracle rater, standing in for
    held-out human data. The returned net carries the weights of the best
    validation-loss checkpoint.
    """
    user_net = user_net or embedder
    oracle_cfg = oracle_cfg or OracleConfig()
    val_embedder = val_embedder or embedder
    rng = np.random.default_rng(cfg.seed)
    tgen = torch.Generator().manual_seed(cfg.seed)

    targets = np.stack([generator.sample_latent(rng) for _ in range(cfg.n_targets)])
    sim_data = SimulatedRankings(generator, pools, user_net)
    sims, cat_idx = sim_data.target_sims(targets)
    targets_t = torch.tensor(targets, dtype=torch.float32)

    val_targets = np.stack([generator.sample_latent(rng) for _ in range(cfg.n_val_targets)])
    ranked_val = oracle_ranked_latents(generator, pools, val_targets, oracle_cfg, rng)
    val_targets_t = torch.tensor(val_targets, dtype=torch.float32)

    net = ReconstructionNet(cfg.net)
    decoder = DifferentiableDecoder(generator)
    opt = torch.optim.Adam(net.parameters(), lr=cfg.lr, betas=(cfg.beta1, cfg.beta2))

    log = []
    best_val, best_step, best_state = np.inf, 0, {k: v.clone() for k, v in net.state_dict().items()}
    running = []
    for step in range(1, cfg.steps + 1):
        idx = torch.randint(cfg.n_targets, (cfg.batch_size,), generator=tgen)
        ranked = sim_data.ranked_latents(sims[idx], cat_idx[idx], cfg.sigma, tgen)
        if cfg.variable_iters:
            n_iter = int(torch.randint(1, cfg.max_iters + 1, (1,), generator=tgen))
        else:
            n_iter = cfg.max_iters
        w_rec = net(ranked[:, :n_iter])
        loss = reconstruction_loss(w_rec, targets_t[idx], decoder, embedder, cfg.lambda_e)
        opt.zero_grad()
        loss.backward()
        opt.step()
        running.append(float(loss.detach()))
        if step % cfg.val_every == 0 or step == cfg.steps:
            val_loss, val_sim = _mean_val_metrics(
                net, ranked_val, val_targets_t, decoder, embedder, cfg.lambda_e, val_embedder
            )
            log.append((step, float(np.mean(running)), val_loss, val_sim))
            running = []
            if val_loss < best_val:
                best_val, best_step = val_loss, step
                best_state = {k: v.clone() for k, v in net.state_dict().items()}
    net.load_state_dict(best_state)
    return TrainResult(net=net, log=log, best_step=best_step, best_val_loss=best_val)
