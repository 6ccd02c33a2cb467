"""
OS-POSG ソルバーの例外定義

各例外は CLI の終了コード (exit_code) と詳細メッセージ (detail) を持つ。
0: 正常終了 / 2: 入力エラー / 3: 計算予算超過 / 4: 内部アサーション違反
"""
from typing import Any, Dict, Optional


EXIT_OK = 0
EXIT_INPUT_ERROR = 2
EXIT_BUDGET_EXCEEDED = 3
EXIT_INTERNAL_ERROR = 4


class OsposgError(Exception):
    """ソルバー例外の基底クラス"""

    exit_code: int = EXIT_INTERNAL_ERROR

    def __init__(self, detail: str, context: Optional[Dict[str, Any]] = None):
        super().__init__(detail)
        self.detail = detail
        self.context = context or {}

    def __str__(self) -> str:
        if not self.context:
            return self.detail
        extra = ", ".join(f"{k}={v}" for k, v in self.context.items())
        return f"{self.detail} ({extra})"


# --- ゲーム定義の検証エラー ---

class InvalidGame(OsposgError):
    """ゲーム定義が不正"""
    exit_code = EXIT_INPUT_ERROR


class NegativeProbability(InvalidGame):
    """遷移確率が負"""


class RowSumMismatch(InvalidGame):
    """遷移行の確率和が1からずれている"""


class PartitionLeak(InvalidGame):
    """信念の台が宣言された後続ブロックからはみ出す"""


class GammaOutOfRange(InvalidGame):
    """割引率が (0,1) の外"""


class UnknownSymbol(InvalidGame):
    """未定義の状態・行動・観測を参照している"""


class InvalidStrategy(InvalidGame):
    """信念・ステージ戦略が確率分布になっていない"""


# --- 実行時の数値エラー ---

class ZeroProbabilityObservation(OsposgError):
    """確率0の (a1, o) で信念更新しようとした"""


class EmptyBound(OsposgError):
    """ブロックに α ベクトル / 点が存在しない"""


class RangeViolation(OsposgError):
    """値が [L, U] の範囲外"""


class CrossBlockEvaluation(OsposgError):
    """異なるブロックの信念で評価しようとした"""


class LpFailure(OsposgError):
    """LP ソルバーの失敗"""


class NumericalFailure(LpFailure):
    """ソルバーが収束しなかった"""


class LpInfeasible(LpFailure):
    """LP が実行不可能"""


class LpUnbounded(LpFailure):
    """LP が非有界"""


class MissingSubgameAlpha(OsposgError):
    """valcomp に必要な (a1, o) の α ベクトルがない"""


class InfeasibleGadget(OsposgError):
    """ガジェット制約付き再解法が実行不可能 (max-justified でない下界)"""


class WallClockExceeded(OsposgError):
    """計算時間の上限を超過"""
    exit_code = EXIT_BUDGET_EXCEEDED


# --- 入力・設定エラー ---

class ConfigError(OsposgError):
    """設定値が不正"""
    exit_code = EXIT_INPUT_ERROR


class GeneratorError(OsposgError):
    """ドメイン生成パラメータが不正"""
    exit_code = EXIT_INPUT_ERROR


class DisconnectedGraph(GeneratorError):
    """再試行しても連結グラフが得られない"""


class BoundsMismatch(OsposgError):
    """境界ファイルがゲームと一致しない"""
    exit_code = EXIT_INPUT_ERROR


class SizeLimitExceeded(OsposgError):
    """オラクルの規模上限を超過"""
    exit_code = EXIT_INPUT_ERROR
