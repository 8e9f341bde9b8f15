import json

import numpy as np
import pytest

from faceforge.embedding import embed_many
from faceforge.evaluation import (
    build_lineup,
    export_report,
    identification_rate,
    run_lineup_study,
    run_simulated_study,
    top_k_rate,
)
from faceforge.reconstruction import MAX_ITERS, RecNetConfig, ReconstructionNet


@pytest.fixture(scope="module")
def recon_net():
    return ReconstructionNet(RecNetConfig(init_seed=0))


def test_build_lineup_nearest_neighbors(generator, base_net):
    rng = np.random.default_rng(0)
    target = generator.decode_params(generator.sample_latent(rng))
    pool = [generator.decode_params(generator.sample_latent(rng)) for _ in range(40)]
    lineup = build_lineup(target, pool, base_net, np.random.default_rng(1))
    assert len(lineup.candidates) == 4
    # the target itself is among the candidates at the recorded index
    assert np.array_equal(
        lineup.candidates[lineup.target_index].observable(), target.observable()
    )
    # brute-force nearest three by embedding distance
    emb = embed_many(base_net, [target] + pool)
    dists = np.linalg.norm(emb[1:] - emb[0], axis=1)
    expect = sorted(np.sort(dists)[:3])
    assert np.allclose(sorted(lineup.neighbor_distances), expect)
    with pytest.raises(ValueError):
        build_lineup(target, pool[:2], base_net, rng)


def test_identification_and_topk_rates_golden():
    votes = [
        ([0, 1, 2, 3], 0),  # rank-1 hit
        ([1, 0, 2, 3], 0),  # top-3 hit only
        ([1, 2, 3, 0], 0),  # miss entirely (rank 4)
        ([2, 0, 1, 3], 2),  # rank-1 hit
    ]
    assert identification_rate(votes) == 50.0
    assert top_k_rate(votes, 3) == 75.0
    assert top_k_rate(votes, 1) == 50.0
    with pytest.raises(ValueError):
        identification_rate([])
    with pytest.raises(ValueError):
        top_k_rate([])


def test_simulated_study_shapes_and_stop_rule(generator, pools, recon_net, tuned_net, oracle_cfg):
    report = run_simulated_study(
        8, generator, pools, recon_net, tuned_net, oracle_cfg, alpha=0.05, seed=3
    )
    assert report.n_targets == 8
    assert len(report.per_target_similarity) == 8
    assert len(report.curve_similarity) == MAX_ITERS
    assert len(report.curve_latent_change) == MAX_ITERS
    assert report.curve_latent_change[0] == 0.0
    for stop in report.stop_iterations:
        assert 2 <= stop <= MAX_ITERS
    for sim in report.per_target_similarity + report.final_similarity + report.baseline_similarity:
        assert -1.0 - 1e-6 <= sim <= 1.0 + 1e-6
    # determinism
    again = run_simulated_study(
        8, generator, pools, recon_net, tuned_net, oracle_cfg, alpha=0.05, seed=3
    )
    assert again.per_target_similarity == report.per_target_similarity
    with pytest.raises(ValueError):
        run_simulated_study(0, generator, pools, recon_net, tuned_net, oracle_cfg, 0.05)


def test_lineup_study_counts_and_determinism(generator, pools, recon_net, tuned_net, oracle_cfg):
    out = run_lineup_study(
        5, 30, 4, generator, pools, recon_net, tuned_net, oracle_cfg, seed=11
    )
    assert out["n_votes"] == 20
    assert 0.0 <= out["ir"] <= 100.0
    assert out["top3_rate"] >= out["ir"]
    again = run_lineup_study(
        5, 30, 4, generator, pools, recon_net, tuned_net, oracle_cfg, seed=11
    )
    assert again == out
    with pytest.raises(ValueError):
        run_lineup_study(0, 30, 4, generator, pools, recon_net, tuned_net, oracle_cfg)


def test_export_report_files(generator, pools, recon_net, tuned_net, oracle_cfg, tmp_path):
    report = run_simulated_study(
        4, generator, pools, recon_net, tuned_net, oracle_cfg, alpha=0.05, seed=5
    )
    report.ir = 60.0
    report.top3_rate = 97.0
    report.ablation_curves = {"baseline": [[500, 0.8], [1000, 0.82]]}
    written = export_report(report, tmp_path)
    names = {p.name for p in written}
    assert names == {"curves.csv", "per_target.csv", "ablation_curves.csv", "summary.json"}
    curves = (tmp_path / "curves.csv").read_text().strip().splitlines()
    assert curves[0] == "iteration,mean_similarity,mean_latent_change"
    assert len(curves) == MAX_ITERS + 1
    per_target = (tmp_path / "per_target.csv").read_text().strip().splitlines()
    assert len(per_target) == 4 + 1
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["ir"] == 60.0
    assert summary["n_targets"] == 4
    assert summary["mean_similarity"] == pytest.approx(report.mean_similarity)
