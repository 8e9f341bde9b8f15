import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from faceforge.embedding import EMBED_DIM, triplet_loss
from faceforge.generator import IDENTITY_FEATURES, FaceGenerator
from faceforge.user_model import kendall_tau, rank_scores

_GEN = FaceGenerator()

latents = st.lists(
    st.floats(-3.0, 3.0, allow_nan=False), min_size=32, max_size=32
).map(lambda xs: np.array(xs))

unit_interval = st.floats(0.01, 0.99, allow_nan=False)

perms = st.permutations(list(range(6)))

vectors = st.lists(
    st.floats(-1.0, 1.0, allow_nan=False), min_size=EMBED_DIM, max_size=EMBED_DIM
).map(lambda xs: np.array(xs))


@settings(max_examples=60, deadline=None)
@given(latents)
def test_decode_stays_in_unit_interval(w):
    obs = _GEN.decode_params(w).observable()
    assert np.all(obs > 0.0) and np.all(obs < 1.0)


@settings(max_examples=60, deadline=None)
@given(latents, st.sampled_from(IDENTITY_FEATURES), unit_interval)
def test_slider_always_exact_and_isolated(w, feature, target):
    w2 = _GEN.apply_slider(w, feature, target)
    before = _GEN.decode_params(w).observable()
    after = _GEN.decode_params(w2).observable()
    j = IDENTITY_FEATURES.index(feature)
    assert abs(after[j] - target) < 1e-9
    mask = np.ones(len(after), dtype=bool)
    mask[j] = False
    assert np.abs(after[mask] - before[mask]).max() < 1e-9


@settings(max_examples=60, deadline=None)
@given(latents, st.sampled_from(IDENTITY_FEATURES), unit_interval)
def test_slider_latent_step_is_along_feature_direction(w, feature, target):
    delta = _GEN.apply_slider(w, feature, target) - w
    direction = _GEN.feature_direction(feature)
    residual = delta - direction * float(np.dot(delta, direction))
    assert np.linalg.norm(residual) < 1e-9


@settings(max_examples=100, deadline=None)
@given(perms, perms)
def test_kendall_tau_bounds_and_symmetry(r1, r2):
    t = kendall_tau(r1, r2)
    assert -1.0 <= t <= 1.0
    assert t == kendall_tau(r2, r1)
    assert kendall_tau(r1, r1) == 1.0
    assert kendall_tau(r1, list(reversed(r1))) == -1.0


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(-1.0, 1.0, allow_nan=False), min_size=6, max_size=6),
    st.floats(0.0, 2.0, allow_nan=False),
    st.integers(0, 2**31 - 1),
)
def test_rank_scores_always_a_permutation(sims, sigma, seed):
    order = rank_scores(np.array(sims), sigma, np.random.default_rng(seed))
    assert sorted(order.tolist()) == [0, 1, 2, 3, 4, 5]


@settings(max_examples=60, deadline=None)
@given(vectors, vectors, vectors, st.floats(0.0, 1.0, allow_nan=False))
def test_triplet_loss_nonnegative_and_margin_monotone(a, p, n, margin):
    loss = triplet_loss(a, p, n, margin)
    assert loss >= 0.0
    assert triplet_loss(a, p, n, margin + 0.1) >= loss
