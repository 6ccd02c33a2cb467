# app/commands/play.py

import logging
from typing import List, Optional

import click

from app.commands import echo_json, handle_errors
from app.config import PLAY_CONFIG
from app.models.schemas import PlayReport
from app.services.play import (
    PLAY_MODES,
    build_policies,
    default_horizon,
    export_trajectories,
    sandwich_interval,
    sandwich_verdict,
    simulate,
    truncation_tolerance,
)
from app.services.run_ledger import record_play
from app.services.storage import game_hash, load_bounds, load_game

logger = logging.getLogger(__name__)


@click.command()
@click.argument("game_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("bounds_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--mode", type=click.Choice(PLAY_MODES), default="selfplay", show_default=True)
@click.option("--episodes", type=int, default=PLAY_CONFIG["episodes"], show_default=True)
@click.option("--horizon", type=int, default=None, help="打ち切りステップ数（既定は τ_c ≤ 許容値となる最小値）")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--workers", type=int, default=PLAY_CONFIG["workers"], show_default=True)
@click.option("--trajectories", "trajectory_path", type=click.Path(dir_okay=False), default=None)
@click.option("--record/--no-record", default=False, help="実行記録 DB に保存")
@handle_errors
def play(
    game_path: str,
    bounds_path: str,
    mode: str,
    episodes: int,
    horizon: Optional[int],
    seed: int,
    workers: int,
    trajectory_path: Optional[str],
    record: bool,
):
    """抽出した戦略でエピソードを実行し、[uv, ov] との整合を判定する"""
    game = load_game(game_path)
    lb, ub, meta = load_bounds(bounds_path, game)
    warnings: List[str] = []

    horizon = default_horizon(game) if horizon is None else horizon
    tolerance = truncation_tolerance(game, horizon)
    if tolerance > PLAY_CONFIG["truncation_tolerance"]:
        message = f"ホライズン T={horizon} が短く τ_c={tolerance:.4g} だけ判定区間を広げます"
        logger.warning(message)
        warnings.append(message)
    if meta.budget_exceeded:
        warnings.append("境界は時間切れの solve によるものです")

    p1, p2 = build_policies(game, lb, ub, mode)
    stats = simulate(
        game, p1, p2, horizon=horizon, episodes=episodes, seed=seed, workers=workers,
        record=trajectory_path is not None,
    )
    low, high = sandwich_interval(stats, meta.lower_value, meta.upper_value, mode)
    verdict = sandwich_verdict(stats, meta.lower_value, meta.upper_value, mode)
    if trajectory_path:
        lines = export_trajectories(game, stats.results, trajectory_path)
        logger.info(f"軌跡を書き出しました: {trajectory_path} ({lines} 行)")
    if record:
        record_play(game_hash(game), mode, stats, verdict)

    report = PlayReport(
        mode=mode,
        episodes=stats.episodes,
        horizon=stats.horizon,
        mean=stats.mean,
        standard_error=stats.standard_error,
        min_payoff=stats.min,
        max_payoff=stats.max,
        truncation=stats.truncation,
        lower_value=meta.lower_value,
        upper_value=meta.upper_value,
        interval=[low, high],
        verdict=verdict,
        warnings=warnings,
    )
    echo_json(report.model_dump())
