"""
OS-POSG ソルバー 設定管理
HSVI / 初期境界 / 戦略抽出 / ベンチマークの既定値
"""
from typing import Any, Dict, Optional
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from dotenv import load_dotenv

from app.exceptions import ConfigError

# .envファイルの読み込み
env_path = Path(__file__).parent.parent / ".env"
load_dotenv(env_path)


def _env_float(name: str, default: float) -> float:
    value = os.getenv(name)
    return float(value) if value not in (None, "") else default


def _env_int(name: str, default: int) -> int:
    value = os.getenv(name)
    return int(value) if value not in (None, "") else default


# HSVI 設定
SOLVER_CONFIG = {
    "epsilon": _env_float("OSPOSG_EPSILON", 1.0),           # 目標ギャップ
    "eta": _env_float("OSPOSG_ETA", 0.9),                   # ε_imm スケジュールの重み
    "epsilon_floor": _env_float("OSPOSG_EPSILON_FLOOR", 0.25),
    "neighborhood_ratio": 0.9,     # D = ratio * (1-γ)ε / (2δ)
    "max_trial_depth": _env_int("OSPOSG_MAX_TRIAL_DEPTH", 500),
    "wall_clock_limit": None,      # 秒（None = 無制限）
    "prune_growth": _env_float("OSPOSG_PRUNE_GROWTH", 0.10),  # Υ が10%増えたら枝刈り
}

# 初期境界（値反復）設定
INIT_CONFIG = {
    "beta": _env_float("OSPOSG_INIT_BETA", 0.025),                # 反復停止の変化量
    "time_limit": _env_float("OSPOSG_INIT_TIME_LIMIT", 1200.0),   # 各境界ごとの上限（秒）
    "reuse_tolerance_ratio": 0.1,  # 前回の均衡戦略を再利用できる許容ギャップ（β比）
}

# LP 設定
LP_CONFIG = {
    "method": "highs",
    "feasibility_tolerance": 1e-6,
    "dump_dir": os.getenv("OSPOSG_LP_DUMP_DIR", ""),  # 空でなければ全LPをダンプ
}

# 数値許容誤差
TOLERANCE_CONFIG = {
    "probability": 1e-9,     # 入力検証
    "derived_sum": 1e-8,     # 派生確率の和
    "bound_range": 1e-6,     # [L, U] 範囲チェック
    "dominance": 1e-9,       # Γ の支配判定
    "prune": 1e-9,           # Υ の枝刈り判定
    "support": 1e-9,         # π1(a1) / b(s) をゼロとみなす閾値
    "gadget_slack": 5e-7,    # ガジェット制約の緩和量
}

# 戦略抽出・シミュレーション設定
PLAY_CONFIG = {
    "truncation_tolerance": _env_float("OSPOSG_TRUNCATION_TOLERANCE", 0.5),
    "episodes": _env_int("OSPOSG_EPISODES", 1000),
    "workers": _env_int("OSPOSG_WORKERS", 1),
    "max_cache_size": 5000,   # ステージゲーム解のキャッシュ上限
    "se_multiplier": 3.0,     # サンドイッチ判定の標準誤差倍率
}

# オラクル設定
ORACLE_CONFIG = {
    "max_states": 4,
    "max_actions": 3,
    "max_observations": 3,
    "max_horizon": 4,
    "max_lp_rows": 200_000,
    "max_history_nodes": 100_000,  # 方策評価・POMDP の履歴ノード上限
}

# ドメイン生成の既定値
DOMAIN_DEFAULTS = {
    "gamma": 0.95,
    "capture_reward": 100.0,
    "breach_penalty": -100.0,
    "patrol_edge_prob": 0.25,
    "patrol_retry_budget": 100,
}

# ログ設定
LOGGING_CONFIG = {
    "level": os.getenv("LOG_LEVEL", "INFO"),
    "format": "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    "progress_logger": "osposg.progress",
    "file": "osposg_progress.jsonl",
    "max_bytes": 10 * 1024 * 1024,  # 10MB
    "backup_count": 5
}

# ベンチマーク設定
BENCHMARK_CONFIG = {
    "suites": {
        "smoke": [
            ("pennies", {"gamma": 0.9}),
            ("pursuit", {"rows": 1, "cols": 3, "pursuers": 1, "gamma": 0.95}),
            ("tiger", {"gamma": 0.9, "listen_accuracy": 0.85}),
        ],
        "full": [
            ("pursuit", {"rows": 3, "cols": 3, "pursuers": 2, "gamma": 0.95}),
            ("search", {"width": 3, "config": "1-1", "gamma": 0.95}),
            ("patrolling", {"vertices": 7, "edge_prob": 0.25, "attack_time": 3, "gamma": 0.95, "seed": 1}),
        ],
    },
    "epsilon": 1.0,
    "time_limit": 1800.0,
    "output_format": "json"
}

# 環境別設定
ENV = os.getenv("ENVIRONMENT", "development")

if ENV == "production":
    # 本番環境設定
    LOGGING_CONFIG["level"] = "WARNING"
    SOLVER_CONFIG["wall_clock_limit"] = 36000.0
elif ENV == "staging":
    # ステージング環境設定
    LOGGING_CONFIG["level"] = "INFO"
    SOLVER_CONFIG["wall_clock_limit"] = 3600.0
else:
    # 開発環境設定（デフォルト）
    pass


@dataclass
class SolverConfig:
    """1回の solve のパラメータ"""
    epsilon: float = SOLVER_CONFIG["epsilon"]
    neighborhood: Optional[float] = None        # D（None = 既定規則）
    eta: float = SOLVER_CONFIG["eta"]
    epsilon_floor: float = SOLVER_CONFIG["epsilon_floor"]
    max_trial_depth: int = SOLVER_CONFIG["max_trial_depth"]
    wall_clock_limit: Optional[float] = SOLVER_CONFIG["wall_clock_limit"]
    seed: int = 0
    init_beta: float = INIT_CONFIG["beta"]
    init_time_limit: float = INIT_CONFIG["time_limit"]
    prune_growth: float = SOLVER_CONFIG["prune_growth"]
    extra: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ConfigError("epsilon は正である必要があります", {"epsilon": self.epsilon})
        if not 0 < self.eta <= 1:
            raise ConfigError("eta は (0, 1] の範囲である必要があります", {"eta": self.eta})
        if self.init_beta <= 0:
            raise ConfigError("init_beta は正である必要があります", {"init_beta": self.init_beta})
        if self.prune_growth < 0:
            raise ConfigError("prune_growth は非負である必要があります")
        if self.max_trial_depth < 1:
            raise ConfigError("max_trial_depth は1以上である必要があります")

    def resolve_neighborhood(self, gamma: float, delta: float) -> float:
        """近傍パラメータ D を決定し 0 < D < (1-γ)ε/(2δ) を検証する"""
        if delta <= 0:
            # L = U: ρ は D によらず γ^-t で増加する
            return 0.0 if self.neighborhood is None else self.neighborhood
        upper = (1.0 - gamma) * self.epsilon / (2.0 * delta)
        if self.neighborhood is None:
            return SOLVER_CONFIG["neighborhood_ratio"] * upper
        if not 0 < self.neighborhood < upper:
            raise ConfigError(
                "neighborhood は (0, (1-γ)ε/(2δ)) の範囲である必要があります",
                {"neighborhood": self.neighborhood, "upper": upper},
            )
        return self.neighborhood

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


# 設定検証
def validate_config() -> bool:
    """設定の妥当性を検証"""
    try:
        if SOLVER_CONFIG["epsilon"] <= 0:
            raise ValueError("epsilon が不正です")
        if not 0 < SOLVER_CONFIG["eta"] <= 1:
            raise ValueError("eta が不正です")
        if not 0 < SOLVER_CONFIG["neighborhood_ratio"] < 1:
            raise ValueError("neighborhood_ratio は (0,1) である必要があります")
        if INIT_CONFIG["beta"] <= 0 or INIT_CONFIG["time_limit"] <= 0:
            raise ValueError("初期化パラメータが不正です")
        if PLAY_CONFIG["truncation_tolerance"] <= 0:
            raise ValueError("truncation_tolerance が不正です")
        if PLAY_CONFIG["workers"] < 1:
            raise ValueError("workers は1以上である必要があります")
        return True

    except Exception as e:
        print(f"設定検証エラー: {str(e)}")
        return False


class Settings:
    """アプリケーション設定クラス（シングルトン）"""

    # 環境設定
    ENVIRONMENT: str = ENV
    DEBUG: bool = os.getenv("DEBUG", "False").lower() == "true"
    LOG_LEVEL: str = LOGGING_CONFIG["level"]

    # 実行記録 DB
    DATABASE_URL: str = os.getenv("DATABASE_URL", "sqlite:///./osposg_runs.db")
    RUN_SLOW_TESTS: bool = os.getenv("OSPOSG_RUN_SLOW", "0") == "1"

    SOLVER_CONFIG = SOLVER_CONFIG
    INIT_CONFIG = INIT_CONFIG
    PLAY_CONFIG = PLAY_CONFIG

    @classmethod
    def validate(cls) -> None:
        """設定の妥当性を検証"""
        if not validate_config():
            raise ConfigError("設定検証に失敗しました")


# シングルトンインスタンス
settings = Settings()


if __name__ == "__main__":
    print("=== OS-POSG Solver 設定確認 ===\n")

    if validate_config():
        print("✅ 設定検証: 成功")
    else:
        print("❌ 設定検証: 失敗")

    print(f"\n環境: {ENV}")
    print(f"ε = {SOLVER_CONFIG['epsilon']}, η = {SOLVER_CONFIG['eta']}, β = {INIT_CONFIG['beta']}")
    print(f"DB: {settings.DATABASE_URL}")
