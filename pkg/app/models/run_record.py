# app/models/run_record.py

from sqlalchemy import JSON, Boolean, Column, DateTime, Float, Integer, String
from sqlalchemy.sql import func

from app.database import Base


class SolveRun(Base):
    """solve / bench の実行記録"""
    __tablename__ = "solve_runs"

    # 主キー
    id = Column(Integer, primary_key=True, index=True)

    # ゲーム
    family = Column(String(50))  # ドメイン名（手書きのゲームは None）
    params = Column(JSON)  # 生成パラメータ
    game_hash = Column(String(40), nullable=False, index=True)
    n_states = Column(Integer, nullable=False)
    n_transitions = Column(Integer, nullable=False)

    # 結果
    epsilon = Column(Float, nullable=False)
    final_gap = Column(Float, nullable=False)
    lower_value = Column(Float, nullable=False)  # uv(b_init)
    upper_value = Column(Float, nullable=False)  # ov(b_init)
    trials = Column(Integer, default=0)
    updates = Column(Integer, default=0)
    gamma_size = Column(Integer, default=0)  # |Γ|
    upsilon_size = Column(Integer, default=0)  # |Υ|
    timing = Column(JSON)  # 区間ごとの秒数
    budget_exceeded = Column(Boolean, default=False)

    created_at = Column(DateTime(timezone=True), server_default=func.now())

    def __repr__(self):
        return f"<SolveRun(id={self.id}, family={self.family}, gap={self.final_gap:.4f})>"


class PlayRun(Base):
    """play の実行記録"""
    __tablename__ = "play_runs"

    id = Column(Integer, primary_key=True, index=True)

    game_hash = Column(String(40), nullable=False, index=True)
    mode = Column(String(20), nullable=False)  # selfplay / p1-vs-uniform / uniform-vs-p2

    # 利得統計
    episodes = Column(Integer, nullable=False)
    horizon = Column(Integer, nullable=False)
    mean = Column(Float, nullable=False)
    standard_error = Column(Float, nullable=False)
    min_payoff = Column(Float)
    max_payoff = Column(Float)
    truncation = Column(Float)  # τ_c
    verdict = Column(String(10))  # pass / fail

    created_at = Column(DateTime(timezone=True), server_default=func.now())
