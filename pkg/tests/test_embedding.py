import math

import numpy as np
import pytest
import torch

from faceforge.embedding import (
    DEFAULT_ORACLE_WEIGHTS,
    EMBED_DIM,
    EmbeddingNet,
    FinetuneConfig,
    OracleConfig,
    Triplet,
    cosine,
    embed,
    embed_many,
    finetune,
    generate_triplets,
    mean_triplet_loss,
    oracle_rank,
    oracle_similarity,
    satisfaction_rate,
    synthesize_oracle_triplets,
    triplet_loss,
)
from faceforge.generator import (
    IDENTITY_FEATURES,
    N_IDENTITY,
    N_NUISANCE,
    NUISANCE_FEATURES,
    FaceParams,
)


def _face(rng):
    return FaceParams(
        identity=rng.uniform(0.05, 0.95, size=N_IDENTITY),
        nuisance=rng.uniform(0.05, 0.95, size=N_NUISANCE),
    )


def test_embedding_deterministic_and_normalized(base_net):
    rng = np.random.default_rng(1)
    f = _face(rng)
    a = embed(base_net, f)
    b = embed(base_net, f)
    assert np.array_equal(a, b)
    assert a.shape == (EMBED_DIM,)
    assert abs(np.linalg.norm(a) - 1.0) < 1e-6


def test_embedding_same_seed_same_weights():
    n1 = EmbeddingNet(init_seed=9)
    n2 = EmbeddingNet(init_seed=9)
    for p1, p2 in zip(n1.parameters(), n2.parameters()):
        assert torch.equal(p1, p2)
    n3 = EmbeddingNet(init_seed=10)
    assert any(not torch.equal(a, b) for a, b in zip(n1.parameters(), n3.parameters()))


def test_embedding_golden_forward_numpy(base_net):
    # independent numpy re-evaluation of the forward pass
    rng = np.random.default_rng(2)
    f = _face(rng)
    x = f.observable()
    sd = {k: v.detach().numpy().astype(np.float64) for k, v in base_net.state_dict().items()}
    h = np.tanh(sd["fc1.weight"] @ x + sd["fc1.bias"])
    h = np.tanh(sd["fc2.weight"] @ h + sd["fc2.bias"])
    out = sd["fc3.weight"] @ h + sd["fc3.bias"]
    out = out / np.linalg.norm(out)
    assert np.abs(embed(base_net, f) - out).max() < 1e-5


def test_embed_many_matches_single(base_net):
    rng = np.random.default_rng(3)
    faces = [_face(rng) for _ in range(5)]
    batch = embed_many(base_net, faces)
    for i, f in enumerate(faces):
        assert np.abs(batch[i] - embed(base_net, f)).max() < 1e-6


def test_oracle_similarity_formula():
    rng = np.random.default_rng(30)
    a = FaceParams(identity=np.full(N_IDENTITY, 0.5), nuisance=np.full(N_NUISANCE, 0.5))
    ident = a.identity.copy()
    ident[IDENTITY_FEATURES.index("eye_size")] += 0.1  # weight 2.0
    ident[IDENTITY_FEATURES.index("face_width")] += 0.2  # weight 1.0
    nuis = a.nuisance.copy()
    nuis[NUISANCE_FEATURES.index("lighting")] += 0.4  # ignored
    b = FaceParams(identity=ident, nuisance=nuis)
    expected = -(2.0 * 0.1**2 + 1.0 * 0.2**2)
    assert abs(oracle_similarity(a, b, OracleConfig()) - expected) < 1e-12
    assert oracle_similarity(a, a, OracleConfig()) == 0.0


def test_oracle_weights_layout():
    heavy = {
        "eye_size",
        "eye_spacing",
        "eye_height",
        "nose_width",
        "nose_length",
        "mouth_width",
        "lip_thickness",
    }
    for j, name in enumerate(IDENTITY_FEATURES):
        assert DEFAULT_ORACLE_WEIGHTS[j] == (2.0 if name in heavy else 1.0)
    assert DEFAULT_ORACLE_WEIGHTS.shape == (N_IDENTITY,)


def test_oracle_rank_zero_noise_is_exact_order():
    rng = np.random.default_rng(4)
    target = FaceParams(identity=np.full(N_IDENTITY, 0.5), nuisance=np.full(N_NUISANCE, 0.5))
    faces = []
    for k in range(6):
        ident = target.identity.copy()
        ident[0] += 0.05 * (k + 1)
        faces.append(FaceParams(identity=ident, nuisance=target.nuisance.copy()))
    order = oracle_rank(target, faces, OracleConfig(noise=0.0), rng)
    assert list(order) == [0, 1, 2, 3, 4, 5]


def test_oracle_rank_noise_bounded_perturbation():
    # squared distance grows linearly in k, so min-max normalised scores are
    # exactly 1, 0.8, ..., 0. Noise of half-width 0.22 can swap near
    # neighbours (gap 0.2) but never faces 3+ ranks apart (gap >= 0.6 > 0.44)
    rng = np.random.default_rng(5)
    target = FaceParams(identity=np.full(N_IDENTITY, 0.5), nuisance=np.full(N_NUISANCE, 0.5))
    faces = []
    for k in range(6):
        ident = target.identity.copy()
        ident[0] += 0.15 * math.sqrt(k)
        faces.append(FaceParams(identity=ident, nuisance=target.nuisance.copy()))
    saw_swap = False
    for _ in range(300):
        order = list(oracle_rank(target, faces, OracleConfig(noise=0.22), rng))
        assert order.index(0) <= 2 and order.index(5) >= 3
        saw_swap = saw_swap or order != [0, 1, 2, 3, 4, 5]
    assert saw_swap


def test_triplet_loss_matches_constructed_distances():
    # unit vectors at angle alpha have squared distance 2 - 2 cos(alpha)
    def unit(theta):
        v = np.zeros(EMBED_DIM)
        v[0], v[1] = math.cos(theta), math.sin(theta)
        return v

    a, p, n = unit(0.0), unit(0.3), unit(1.2)
    d_ap = 2 - 2 * math.cos(0.3)
    d_an = 2 - 2 * math.cos(1.2)
    assert abs(triplet_loss(a, p, n, margin=0.1) - max(d_ap - d_an + 0.1, 0.0)) < 1e-12
    # easy triplet clamps at zero
    assert triplet_loss(a, unit(0.1), unit(2.0), margin=0.1) == 0.0
    # positive == negative leaves exactly the margin
    assert abs(triplet_loss(a, p, p, margin=0.1) - 0.1) < 1e-12


def test_mean_triplet_loss_torch_matches_numpy(base_net):
    rng = np.random.default_rng(6)
    trips = [Triplet(_face(rng), _face(rng), _face(rng)) for _ in range(8)]
    torch_val = mean_triplet_loss(base_net, trips)
    manual = np.mean(
        [
            triplet_loss(
                embed(base_net, t.anchor),
                embed(base_net, t.positive),
                embed(base_net, t.negative),
                margin=0.1,
            )
            for t in trips
        ]
    )
    assert abs(torch_val - manual) < 1e-5


def test_generate_triplets_structure(generator, pools):
    rng = np.random.default_rng(7)
    target = generator.decode_params(generator.sample_latent(rng))
    aux = pools["00"][0]
    order = list(rng.permutation(6))
    trips = generate_triplets(target, [(aux, order)])
    assert len(trips) == 15
    faces = [img.params for img in aux.images]
    seen = set()
    for t in trips:
        assert np.array_equal(t.anchor.observable(), target.observable())
        i = next(k for k, f in enumerate(faces) if np.array_equal(f.observable(), t.positive.observable()))
        j = next(k for k, f in enumerate(faces) if np.array_equal(f.observable(), t.negative.observable()))
        # positive was ranked strictly better than negative
        assert order.index(i) < order.index(j)
        seen.add((i, j))
    assert len(seen) == 15
    with pytest.raises(ValueError):
        generate_triplets(target, [(aux, [0, 0, 1, 2, 3, 4])])


def test_finetune_deterministic_and_isolated(generator, oracle_cfg, base_net):
    rng = np.random.default_rng(8)
    trips = synthesize_oracle_triplets(generator, oracle_cfg, 40, rng)
    cfg = FinetuneConfig(epochs=2, seed=3)
    before = [p.detach().clone() for p in base_net.parameters()]
    n1 = finetune(base_net, trips, cfg)
    n2 = finetune(base_net, trips, cfg)
    for p1, p2 in zip(n1.parameters(), n2.parameters()):
        assert torch.equal(p1, p2)
    # the input net is untouched and the copy actually moved
    for p, b in zip(base_net.parameters(), before):
        assert torch.equal(p, b)
    assert any(not torch.equal(a, b) for a, b in zip(base_net.parameters(), n1.parameters()))
    with pytest.raises(ValueError):
        finetune(base_net, [], cfg)


def test_finetuned_net_beats_base_on_held_out_triplets(generator, oracle_cfg, base_net, tuned_net):
    held = synthesize_oracle_triplets(generator, oracle_cfg, 60, np.random.default_rng(909))
    assert satisfaction_rate(tuned_net, held) > satisfaction_rate(base_net, held) + 0.1


def test_cosine_helper(base_net):
    rng = np.random.default_rng(9)
    a = embed(base_net, _face(rng))
    b = embed(base_net, _face(rng))
    assert abs(cosine(a, b) - float(np.dot(a, b))) < 1e-6
    assert abs(cosine(3.0 * a, a) - 1.0) < 1e-6
