"""
CLI コマンド共通部品
OsposgError の exit_code をプロセスの終了コードに対応づける
"""
import functools
import json
import logging
from logging.handlers import RotatingFileHandler
from typing import Any, Callable, Optional

import click

from app.config import LOGGING_CONFIG
from app.exceptions import EXIT_INTERNAL_ERROR, OsposgError

logger = logging.getLogger(__name__)


def handle_errors(func: Callable) -> Callable:
    """ソルバー例外を終了コードに変換する"""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except OsposgError as e:
            logger.error(f"{type(e).__name__}: {e}")
            click.echo(f"❌ {type(e).__name__}: {e}", err=True)
            raise click.exceptions.Exit(e.exit_code)
        except (ValueError, FloatingPointError) as e:
            logger.exception("予期しない数値エラー")
            click.echo(f"❌ 内部エラー: {e}", err=True)
            raise click.exceptions.Exit(EXIT_INTERNAL_ERROR)

    return wrapper


def echo_json(payload: Any) -> None:
    """日本語をエスケープせずに JSON を出力"""
    click.echo(json.dumps(payload, ensure_ascii=False, indent=2, default=str))


def attach_progress_log(path: Optional[str]) -> Optional[logging.Handler]:
    """--log: 進捗ロガーに1行1 JSON のファイルハンドラを付ける"""
    if not path:
        return None
    handler = RotatingFileHandler(
        path,
        maxBytes=LOGGING_CONFIG["max_bytes"],
        backupCount=LOGGING_CONFIG["backup_count"],
        encoding="utf-8",
    )
    handler.setFormatter(logging.Formatter("%(message)s"))
    progress = logging.getLogger(LOGGING_CONFIG["progress_logger"])
    progress.addHandler(handler)
    progress.setLevel(logging.INFO)
    return handler


def detach_progress_log(handler: Optional[logging.Handler]) -> None:
    if handler is None:
        return
    logging.getLogger(LOGGING_CONFIG["progress_logger"]).removeHandler(handler)
    handler.close()
