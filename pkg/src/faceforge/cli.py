"""Command-line entry points for training, studies, calibration, and serving."""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import artifacts as art_mod
from .evaluation import ablation_suite, run_lineup_study, run_simulated_study, export_report, StudyReport
from .session import SessionEngine
from .user_model import calibrate_sigma, export_tau_csv, mean_pairwise_tau

EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _guarded(f):
    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)
        except Exception as exc:  # noqa: BLE001 - CLI boundary
            click.echo(f"runtime failure: {exc}", err=True)
            sys.exit(EXIT_RUNTIME)

    return wrapper


def common_options(f):
    f = click.option("--config", "config_path", type=click.Path(exists=True), default=None, help="JSON config file")(f)
    f = click.option("--seed", type=int, default=None, help="override the config seed")(f)
    f = click.option("--out", "out_dir", type=click.Path(), default="artifacts", help="artifact directory")(f)
    return f


@click.group()
def main():
    """Interactive face reconstruction toolkit."""


@main.command("train-embedding")
@common_options
@_guarded
def cmd_train_embedding(config_path, seed, out_dir):
    cfg = art_mod.load_config(config_path)
    if seed is not None:
        cfg["embedding"]["finetune"]["seed"] = seed
    art = art_mod.build_base(cfg, out_dir)
    art_mod.train_embedding(art, out_dir)
    click.echo(f"tuned embedding checkpoint written to {out_dir}")


@main.command("train-reconstructor")
@common_options
@_guarded
def cmd_train_reconstructor(config_path, seed, out_dir):
    cfg = art_mod.load_config(config_path)
    if seed is not None:
        cfg["train"]["seed"] = seed
    art = art_mod.load_artifacts(out_dir)
    art.config = cfg
    if art.tuned_embedder is None:
        raise click.ClickException("run train-embedding first")
    result = art_mod.train_reconstructor(art, out_dir)
    click.echo(f"best val loss {result.best_val_loss:.6f} at step {result.best_step}")


@main.command("simulate")
@common_options
@click.option("--n-targets", type=int, default=200)
@_guarded
def cmd_simulate(config_path, seed, out_dir, n_targets):
    art = art_mod.load_artifacts(out_dir)
    report = run_simulated_study(
        n_targets,
        art.generator,
        art.pools,
        art.recon_net,
        art.embedder,
        art.oracle_cfg,
        art.alpha,
        seed=seed or 0,
    )
    files = export_report(report, Path(out_dir) / "study")
    click.echo(json.dumps(report.summary(), indent=1, sort_keys=True))
    click.echo(f"wrote {len(files)} files under {out_dir}/study")


@main.command("ablate")
@common_options
@click.option("--steps", type=int, default=5000)
@click.option("--n-targets", type=int, default=500)
@_guarded
def cmd_ablate(config_path, seed, out_dir, steps, n_targets):
    art = art_mod.load_artifacts(out_dir)
    base_cfg = art_mod.train_config_from(
        art.config, steps=steps, n_targets=n_targets, seed=seed if seed is not None else art.config["train"]["seed"]
    )
    results = ablation_suite(base_cfg, art.generator, art.pools, art.base_embedder, art.tuned_embedder, art.oracle_cfg)
    report = StudyReport(
        seed=base_cfg.seed, n_targets=0, per_target_similarity=[0.0], final_similarity=[0.0],
        baseline_similarity=[0.0], curve_similarity=[0.0] * 20, curve_latent_change=[0.0] * 20,
        stop_iterations=[0], ablation_curves={k: curve for k, (_, curve) in results.items()},
    )
    export_report(report, Path(out_dir) / "ablation")
    for label, (result, _) in results.items():
        result.write_log(Path(out_dir) / "ablation" / f"train_log_{label}.csv")
    peaks = {k: max(s for _, s in curve) for k, (_, curve) in results.items()}
    click.echo(json.dumps(peaks, indent=1, sort_keys=True))


@main.command("lineup")
@common_options
@click.option("--n-lineups", type=int, default=100)
@click.option("--pool-size", type=int, default=5000)
@click.option("--votes-per-lineup", type=int, default=4)
@_guarded
def cmd_lineup(config_path, seed, out_dir, n_lineups, pool_size, votes_per_lineup):
    art = art_mod.load_artifacts(out_dir)
    result = run_lineup_study(
        n_lineups, pool_size, votes_per_lineup,
        art.generator, art.pools, art.recon_net, art.embedder, art.oracle_cfg, seed=seed or 0,
    )
    (Path(out_dir) / "lineup.json").write_text(json.dumps(result, indent=1, sort_keys=True), encoding="utf-8")
    click.echo(json.dumps(result, indent=1, sort_keys=True))


@main.command("calibrate-sigma")
@common_options
@click.option("--reference", "reference_path", type=click.Path(exists=True), default=None,
              help="CSV of reference tau samples (header 'tau'); defaults to a sigma=0.3 self-test")
@click.option("--n-samples", type=int, default=2000)
@_guarded
def cmd_calibrate(config_path, seed, out_dir, reference_path, n_samples):
    art = art_mod.load_artifacts(out_dir)
    rng = np.random.default_rng(seed or 0)
    if reference_path is None:
        _, reference = mean_pairwise_tau(art.generator, art.embedder, 0.3, n_samples, rng)
    else:
        reference = np.loadtxt(reference_path, skiprows=1)
    grid = [round(0.02 * k, 2) for k in range(0, 31)]
    sigma = calibrate_sigma(reference, grid, n_samples, art.generator, art.embedder, rng)
    export_tau_csv(reference, Path(out_dir) / "reference_tau.csv")
    click.echo(f"calibrated sigma = {sigma}")


@main.command("serve")
@click.option("--bind", default="127.0.0.1:8080", help="addr:port to listen on")
@click.option("--checkpoints", "out_dir", type=click.Path(exists=True), default="artifacts")
@click.option("--sessions", "sessions_dir", type=click.Path(), default="sessions")
@click.option("--static", "static_dir", type=click.Path(), default=None, help="built UI bundle directory")
@_guarded
def cmd_serve(bind, out_dir, sessions_dir, static_dir):
    import uvicorn

    from .service import create_app

    art = art_mod.load_artifacts(out_dir)
    if art.recon_net is None:
        raise click.ClickException("missing reconstructor checkpoint; run train-reconstructor")
    engine = SessionEngine(
        art.generator, art.pools, art.recon_net, art.embedder,
        alpha=art.alpha, oracle_cfg=art.oracle_cfg,
    )
    app = create_app(engine, sessions_dir, static_dir)
    host, _, port = bind.rpartition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))


if __name__ == "__main__":
    main()
