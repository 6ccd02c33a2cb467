"""
ファイル形式・レポートのデータモデル定義
ゲームファイル / 境界ファイル / solve・play レポートの形を決めます
"""
from pydantic import BaseModel, Field
from typing import Any, Dict, List, Optional
from datetime import datetime


# ===== ゲームファイル =====

class Outcome(BaseModel):
    """遷移の1結果 (o, s', p)"""
    o: str = Field(..., description="観測")
    s2: str = Field(..., description="遷移先状態")
    p: float = Field(..., description="確率")


class TransitionRow(BaseModel):
    """(s, a1, a2) からの遷移行"""
    s: str
    a1: str
    a2: str
    out: List[Outcome] = Field(..., description="(o, s', p) のリスト")


class RewardEntry(BaseModel):
    """プレイヤー1の報酬 R(s, a1, a2)"""
    s: str
    a1: str
    a2: str
    r: float


class SuccessorEntry(BaseModel):
    """ブロック遷移 (block, a1, o) -> block"""
    a1: str
    o: str
    block: str


class PartitionBlock(BaseModel):
    """状態分割の1ブロック"""
    block: str = Field(..., description="ブロックID")
    states: List[str] = Field(..., description="ブロックに属する状態")
    successors: List[SuccessorEntry] = Field(default_factory=list, description="後続ブロック")


class GameFile(BaseModel):
    """
    ゲームファイル（JSON）
    rewards に現れない (s, a1, a2) の報酬は0
    """
    states: List[str]
    actions1: List[str]
    actions2: List[str]
    observations: List[str]
    gamma: float
    initial_belief: Dict[str, float] = Field(..., description="状態 -> 確率")
    partitions: Optional[List[PartitionBlock]] = Field(default=None, description="省略時は単一ブロック")
    transitions: List[TransitionRow]
    rewards: List[RewardEntry] = Field(default_factory=list)
    metadata: Dict[str, Any] = Field(default_factory=dict, description="生成パラメータなど")

    class Config:
        json_schema_extra = {
            "example": {
                "states": ["s"],
                "actions1": ["a"],
                "actions2": ["b"],
                "observations": ["o"],
                "gamma": 0.5,
                "initial_belief": {"s": 1.0},
                "transitions": [{"s": "s", "a1": "a", "a2": "b", "out": [{"o": "o", "s2": "s", "p": 1.0}]}],
                "rewards": [{"s": "s", "a1": "a", "a2": "b", "r": 1.0}]
            }
        }


# ===== 境界ファイル =====

class UpsilonPoint(BaseModel):
    """上界の点 (b_i, y_i)"""
    belief: List[float]
    value: float


class BlockBounds(BaseModel):
    """ブロックごとの Γ と Υ"""
    states: List[str]
    gamma_set: List[List[float]] = Field(..., description="α ベクトルの行")
    upsilon_set: List[UpsilonPoint]
    initial_alpha: List[float] = Field(..., description="一様戦略の値（初期 α）")


class BoundsMeta(BaseModel):
    """境界ファイルのメタデータ"""
    format_version: int = 1
    gamma: float
    delta: float
    L: float
    U: float
    lower_value: float = Field(..., description="uv(b_init)")
    upper_value: float = Field(..., description="ov(b_init)")
    epsilon_target: float
    epsilon_achieved: float
    budget_exceeded: bool = False
    config: Dict[str, Any] = Field(default_factory=dict)
    game_hash: str
    created_at: datetime = Field(default_factory=datetime.now)


class BoundsFile(BaseModel):
    """境界ファイル（JSON）"""
    meta: BoundsMeta
    blocks: Dict[str, BlockBounds]


# ===== レポート =====

class SolveReport(BaseModel):
    """solve コマンドの出力"""
    game_hash: str
    lower_value: float
    upper_value: float
    final_gap: float
    epsilon: float
    trials: int
    updates: int
    gamma_size: int
    upsilon_size: int
    budget_exceeded: bool
    timing: Dict[str, float]


class PlayReport(BaseModel):
    """play コマンドの出力"""
    mode: str
    episodes: int
    horizon: int
    mean: float
    standard_error: float
    min_payoff: float
    max_payoff: float
    truncation: float
    lower_value: float
    upper_value: float
    interval: List[float] = Field(..., description="許容区間 [lo, hi]")
    verdict: str = Field(..., description="pass / fail")
    warnings: List[str] = Field(default_factory=list)
