"""
solve / play の実行記録（SQLAlchemy）
session を渡さなければ SessionLocal で開いて commit する
"""
import logging
from typing import Any, Dict, Optional

from sqlalchemy.orm import Session

from app.database import SessionLocal, init_db
from app.models.run_record import PlayRun, SolveRun
from app.services.game import Game
from app.services.hsvi import SolveStats
from app.services.play import PayoffStats

logger = logging.getLogger(__name__)


def _persist(row, session: Optional[Session]):
    owned = session is None
    if owned:
        init_db()
        session = SessionLocal()
    try:
        session.add(row)
        session.commit()
        session.refresh(row)
        return row
    except Exception:
        session.rollback()
        raise
    finally:
        if owned:
            session.close()


def record_solve(
    game: Game,
    game_hash: str,
    stats: SolveStats,
    gamma_size: int,
    upsilon_size: int,
    session: Optional[Session] = None,
) -> SolveRun:
    params: Dict[str, Any] = {k: v for k, v in game.metadata.items() if k not in ("edges", "costs")}
    row = SolveRun(
        family=game.metadata.get("family"),
        params=params,
        game_hash=game_hash,
        n_states=game.n_states,
        n_transitions=game.n_transitions,
        epsilon=stats.epsilon,
        final_gap=stats.final_gap,
        lower_value=stats.lower_value,
        upper_value=stats.upper_value,
        trials=stats.trials,
        updates=stats.updates,
        gamma_size=gamma_size,
        upsilon_size=upsilon_size,
        timing=dict(stats.timing),
        budget_exceeded=stats.budget_exceeded,
    )
    row = _persist(row, session)
    logger.info(f"solve 記録: id={row.id}, gap={stats.final_gap:.4f}")
    return row


def record_play(
    game_hash: str, mode: str, stats: PayoffStats, verdict: str, session: Optional[Session] = None
) -> PlayRun:
    row = PlayRun(
        game_hash=game_hash,
        mode=mode,
        episodes=stats.episodes,
        horizon=stats.horizon,
        mean=stats.mean,
        standard_error=stats.standard_error,
        min_payoff=stats.min,
        max_payoff=stats.max,
        truncation=stats.truncation,
        verdict=verdict,
    )
    row = _persist(row, session)
    logger.info(f"play 記録: id={row.id}, mode={mode}, verdict={verdict}")
    return row

