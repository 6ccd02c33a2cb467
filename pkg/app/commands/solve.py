# app/commands/solve.py

import logging
from pathlib import Path
from typing import Optional

import click

from app.commands import attach_progress_log, detach_progress_log, echo_json, handle_errors
from app.config import INIT_CONFIG, SOLVER_CONFIG, SolverConfig
from app.exceptions import WallClockExceeded
from app.models.schemas import SolveReport
from app.services.game import Game
from app.services.hsvi import SolveStats, solve as run_hsvi
from app.services.run_ledger import record_solve
from app.services.storage import game_hash, load_game, save_bounds

logger = logging.getLogger(__name__)


def default_bounds_path(game_path: str) -> str:
    path = Path(game_path)
    return str(path.with_name(path.stem + ".bounds.json"))


def build_report(digest: str, stats: SolveStats, gamma_size: int, upsilon_size: int) -> SolveReport:
    return SolveReport(
        game_hash=digest,
        lower_value=stats.lower_value,
        upper_value=stats.upper_value,
        final_gap=stats.final_gap,
        epsilon=stats.epsilon,
        trials=stats.trials,
        updates=stats.updates,
        gamma_size=gamma_size,
        upsilon_size=upsilon_size,
        budget_exceeded=stats.budget_exceeded,
        timing={k: round(v, 6) for k, v in stats.timing.items()},
    )


def run_solve(game: Game, config: SolverConfig, out_path: str, record: bool = False) -> SolveReport:
    """解いて境界を書き出す（時間切れでも書き出してから呼び出し側で判定）"""
    lb, ub, stats = run_hsvi(game, config)
    save_bounds(out_path, game, lb, ub, stats, config)
    digest = game_hash(game)
    if record:
        record_solve(game, digest, stats, lb.size(), ub.size())
    return build_report(digest, stats, lb.size(), ub.size())


@click.command()
@click.argument("game_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--epsilon", type=float, default=SOLVER_CONFIG["epsilon"], show_default=True, help="目標ギャップ ε")
@click.option("--neighborhood", type=float, default=None, help="近傍パラメータ D（既定 0.9·(1−γ)ε/(2δ)）")
@click.option("--eta", type=float, default=SOLVER_CONFIG["eta"], show_default=True)
@click.option("--init-beta", type=float, default=INIT_CONFIG["beta"], show_default=True)
@click.option("--init-time-limit", type=float, default=INIT_CONFIG["time_limit"], show_default=True)
@click.option("--time-limit", type=float, default=SOLVER_CONFIG["wall_clock_limit"], help="計算時間の上限（秒）")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--prune-growth", type=float, default=SOLVER_CONFIG["prune_growth"], show_default=True)
@click.option("--log", "log_path", type=click.Path(dir_okay=False), default=None, help="進捗ログ（1行1 JSON）")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None, help="境界ファイル")
@click.option("--record/--no-record", default=False, help="実行記録 DB に保存")
@handle_errors
def solve(
    game_path: str,
    epsilon: float,
    neighborhood: Optional[float],
    eta: float,
    init_beta: float,
    init_time_limit: float,
    time_limit: Optional[float],
    seed: int,
    prune_growth: float,
    log_path: Optional[str],
    out_path: Optional[str],
    record: bool,
):
    """HSVI でゲームを解き、境界 Γ / Υ を書き出す"""
    game = load_game(game_path)
    config = SolverConfig(
        epsilon=epsilon,
        neighborhood=neighborhood,
        eta=eta,
        init_beta=init_beta,
        init_time_limit=init_time_limit,
        wall_clock_limit=time_limit,
        seed=seed,
        prune_growth=prune_growth,
    )
    out_path = out_path or default_bounds_path(game_path)
    handler = attach_progress_log(log_path)
    try:
        report = run_solve(game, config, out_path, record)
    finally:
        detach_progress_log(handler)

    echo_json(report.model_dump())
    if report.budget_exceeded:
        raise WallClockExceeded(
            "時間上限内に目標ギャップへ到達しませんでした（境界は書き出し済み）",
            {"gap": report.final_gap, "epsilon": epsilon, "bounds": out_path},
        )
