"""
OS-POSG Solver コマンドラインエントリポイント
片側部分観測確率ゲームを HSVI で解き、戦略を抽出して検証する
"""
import logging

import click

from app.commands import handle_errors
from app.commands.bench import bench
from app.commands.generate import generate
from app.commands.info import info
from app.commands.play import play
from app.commands.solve import solve
from app.config import LOGGING_CONFIG, settings

logging.basicConfig(
    level=getattr(logging, LOGGING_CONFIG["level"].upper(), logging.INFO),
    format=LOGGING_CONFIG["format"],
)


@click.group()
@click.version_option("1.0.0", prog_name="osposg")
@handle_errors
def cli():
    """OS-POSG Solver 🎲 - 片側部分観測確率ゲームのソルバー"""
    settings.validate()


cli.add_command(generate)
cli.add_command(solve)
cli.add_command(play)
cli.add_command(bench)
cli.add_command(info)


if __name__ == "__main__":
    cli()
