# app/commands/generate.py

from typing import Optional

import click

from app.commands import echo_json, handle_errors
from app.services.domains import (
    gen_matching_pennies,
    gen_patrolling,
    gen_pursuit,
    gen_random,
    gen_search,
    gen_tiger,
)
from app.services.game import Game
from app.services.storage import save_game

out_option = click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False), help="出力ファイル")
gamma_option = click.option("--gamma", type=float, default=None, help="割引率 γ")


def _write(game: Game, out_path: str) -> None:
    digest = save_game(game, out_path)
    summary = game.describe()
    summary.update({"family": game.metadata.get("family"), "hash": digest, "path": out_path})
    echo_json(summary)


@click.group()
def generate():
    """ベンチマークゲームを生成してファイルに書き出す"""


@generate.command()
@click.option("--rows", type=int, required=True)
@click.option("--cols", type=int, required=True)
@click.option("--pursuers", type=int, default=1, show_default=True)
@click.option("--capture-reward", type=float, default=None)
@gamma_option
@out_option
@handle_errors
def pursuit(rows: int, cols: int, pursuers: int, capture_reward: Optional[float], gamma: Optional[float], out_path: str):
    """追跡・逃避ゲーム"""
    _write(gen_pursuit(rows, cols, pursuers, gamma=gamma, capture_reward=capture_reward), out_path)


@generate.command()
@click.option("--width", type=int, required=True)
@click.option("--config", "config", type=click.Choice(["1-1", "2-1"]), default="1-1", show_default=True)
@click.option("--breach-penalty", type=float, default=None)
@gamma_option
@out_option
@handle_errors
def search(width: int, config: str, breach_penalty: Optional[float], gamma: Optional[float], out_path: str):
    """侵入者探索ゲーム"""
    _write(gen_search(width, config, gamma=gamma, breach_penalty=breach_penalty), out_path)


@generate.command()
@click.option("--vertices", type=int, required=True)
@click.option("--edge-prob", "--p", "edge_prob", type=float, default=None, help="辺の確率（既定 0.25）")
@click.option("--attack-time", type=int, default=3, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@gamma_option
@out_option
@handle_errors
def patrolling(vertices: int, edge_prob: Optional[float], attack_time: int, seed: int, gamma: Optional[float], out_path: str):
    """巡回ゲーム（Erdős–Rényi グラフ）"""
    _write(gen_patrolling(vertices, edge_prob, attack_time, gamma=gamma, seed=seed), out_path)


@generate.command()
@click.option("--gamma", type=float, default=0.9, show_default=True)
@out_option
@handle_errors
def pennies(gamma: float, out_path: str):
    """2段階マッチングペニー"""
    _write(gen_matching_pennies(gamma), out_path)


@generate.command("random")
@click.option("--states", "n_states", type=int, required=True)
@click.option("--actions1", "n_actions1", type=int, default=2, show_default=True)
@click.option("--actions2", "n_actions2", type=int, default=2, show_default=True)
@click.option("--observations", "n_observations", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--reward-range", type=(float, float), default=(-1.0, 1.0), show_default=True)
@click.option("--gamma", type=float, default=0.9, show_default=True)
@out_option
@handle_errors
def random_game(n_states, n_actions1, n_actions2, n_observations, seed, reward_range, gamma, out_path):
    """単一ブロックのランダムゲーム"""
    _write(gen_random(n_states, n_actions1, n_actions2, n_observations, gamma, seed, tuple(reward_range)), out_path)


@generate.command()
@click.option("--gamma", type=float, default=0.9, show_default=True)
@click.option("--listen-accuracy", type=float, default=0.85, show_default=True)
@out_option
@handle_errors
def tiger(gamma: float, listen_accuracy: float, out_path: str):
    """tiger POMDP（プレイヤー2の行動は1つ）"""
    _write(gen_tiger(gamma, listen_accuracy), out_path)
