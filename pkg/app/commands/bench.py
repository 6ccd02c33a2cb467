# app/commands/bench.py

import logging
import tempfile
from pathlib import Path
from typing import Optional

import click

from app.commands import handle_errors
from app.config import BENCHMARK_CONFIG, SolverConfig
from app.services.domains import generate
from app.services.hsvi import solve as run_hsvi
from app.services.run_ledger import record_solve
from app.services.storage import game_hash, save_bounds

logger = logging.getLogger(__name__)


@click.command()
@click.option("--suite", type=click.Choice(sorted(BENCHMARK_CONFIG["suites"])), default="smoke", show_default=True)
@click.option("--time-limit", type=float, default=BENCHMARK_CONFIG["time_limit"], show_default=True)
@click.option("--epsilon", type=float, default=BENCHMARK_CONFIG["epsilon"], show_default=True)
@click.option("--out-dir", type=click.Path(file_okay=False), default=None, help="境界ファイルの出力先")
@handle_errors
def bench(suite: str, time_limit: float, epsilon: float, out_dir: Optional[str]):
    """スイートの各インスタンスを生成・求解し、実行記録に保存する"""
    out_dir = out_dir or tempfile.mkdtemp(prefix="osposg_bench_")
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    rows = []
    for family, params in BENCHMARK_CONFIG["suites"][suite]:
        game = generate(family, **params)
        config = SolverConfig(epsilon=epsilon, wall_clock_limit=time_limit)
        lb, ub, stats = run_hsvi(game, config)
        digest = game_hash(game)
        save_bounds(Path(out_dir) / f"{family}_{digest[:8]}.bounds.json", game, lb, ub, stats, config)
        record_solve(game, digest, stats, lb.size(), ub.size())
        rows.append((family, game.n_states, game.n_transitions, stats))

    header = f"{'family':<12}{'|S|':>8}{'trans':>10}{'uv':>12}{'ov':>12}{'gap':>10}{'time[s]':>10}{'budget':>8}"
    click.echo(header)
    click.echo("-" * len(header))
    for family, n_states, n_transitions, stats in rows:
        click.echo(
            f"{family:<12}{n_states:>8}{n_transitions:>10}{stats.lower_value:>12.4f}{stats.upper_value:>12.4f}"
            f"{stats.final_gap:>10.4f}{stats.timing['total']:>10.2f}{'✗' if stats.budget_exceeded else '✓':>8}"
        )
    click.echo(f"📁 境界ファイル: {out_dir}")
