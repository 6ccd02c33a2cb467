# app/commands/info.py

import click

from app.commands import echo_json, handle_errors
from app.services.storage import load_game, summary


@click.command()
@click.argument("game_path", type=click.Path(exists=True, dir_okay=False))
@handle_errors
def info(game_path: str):
    """ゲームの規模・L/U/δ・ブロックを表示する"""
    echo_json(summary(load_game(game_path)))
