"""データベースモデルパッケージ"""
from .run_record import PlayRun, SolveRun

__all__ = ["SolveRun", "PlayRun"]
