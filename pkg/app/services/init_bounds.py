"""
初期境界
- 下界: プレイヤー1が一様戦略をとるときの価値（プレイヤー2にとっての MDP）
- 上界: 完全情報版の確率ゲームの価値（Shapley 型の値反復）
"""
import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from app.config import INIT_CONFIG
from app.services.bounds import AlphaVector, LowerBound, UpperBound
from app.services.game import Game, utility_bounds
from app.services.stage_solver import solve_matrix_game

logger = logging.getLogger(__name__)


@dataclass
class LowerInit:
    """一様戦略の値反復の結果"""
    values: np.ndarray               # 大域状態ごとの値
    alphas: Dict[int, AlphaVector]   # ブロック別の α ベクトル
    residuals: List[float] = field(default_factory=list)
    converged: bool = False
    seconds: float = 0.0


@dataclass
class UpperInit:
    """完全情報ゲームの値反復の結果"""
    values: np.ndarray
    points: Dict[int, Tuple[np.ndarray, np.ndarray]]  # ブロック別の (頂点信念, 値)
    residuals: List[float] = field(default_factory=list)
    converged: bool = False
    seconds: float = 0.0
    matrix_games: int = 0


def _stage_values(game: Game, values: np.ndarray) -> np.ndarray:
    """Q(s,a1,a2) = R(s,a1,a2) + γ Σ_{s'} T(s'|s,a1,a2)·V(s')"""
    cont = game.transition_matrix() @ values
    return game.rewards + game.gamma * cont.reshape(game.rewards.shape)


def _split_by_block(game: Game, values: np.ndarray) -> Dict[int, np.ndarray]:
    return {k: values[block.states] for k, block in enumerate(game.blocks)}


def lb_init(game: Game, beta: Optional[float] = None, time_limit: Optional[float] = None) -> LowerInit:
    """
    val(s) = min_a2 Σ_a1 (1/|A1|)[R + γ Σ T·val(s')] を L から反復する
    各反復値は一様戦略の価値以下なので、打ち切っても下界として有効
    """
    beta = INIT_CONFIG["beta"] if beta is None else beta
    time_limit = INIT_CONFIG["time_limit"] if time_limit is None else time_limit
    bounds = utility_bounds(game)
    started = time.perf_counter()

    values = np.full(game.n_states, bounds.L)
    result = LowerInit(values=values, alphas={})
    while True:
        updated = _stage_values(game, values).mean(axis=1).min(axis=1)
        residual = float(np.max(np.abs(updated - values)))
        values = updated
        result.residuals.append(residual)
        if residual < beta:
            result.converged = True
            break
        if time.perf_counter() - started > time_limit:
            logger.warning(f"下界の初期化が時間上限 {time_limit}s に達しました (残差 {residual:.4g})")
            break

    values = np.clip(values, bounds.L, bounds.U)
    result.values = values
    result.alphas = {k: AlphaVector(k, v) for k, v in _split_by_block(game, values).items()}
    result.seconds = time.perf_counter() - started
    logger.info(
        f"下界初期化: {len(result.residuals)} 反復, 残差 {result.residuals[-1]:.4g}, "
        f"{result.seconds:.2f}s"
    )
    return result


def ub_init(
    game: Game,
    beta: Optional[float] = None,
    time_limit: Optional[float] = None,
    reuse_tolerance: Optional[float] = None,
) -> UpperInit:
    """
    完全情報版の値反復を U から行う
    各状態の行列ゲームは、純粋鞍点 → 前回の均衡戦略の再利用 → LP の順に評価する。
    値は前回値との min をとり、上界の単調減少を保つ
    """
    beta = INIT_CONFIG["beta"] if beta is None else beta
    time_limit = INIT_CONFIG["time_limit"] if time_limit is None else time_limit
    if reuse_tolerance is None:
        reuse_tolerance = INIT_CONFIG["reuse_tolerance_ratio"] * beta
    bounds = utility_bounds(game)
    started = time.perf_counter()

    values = np.full(game.n_states, bounds.U)
    cached: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}
    result = UpperInit(values=values, points={})
    while True:
        stage = _stage_values(game, values)
        updated = np.empty_like(values)
        for s in range(game.n_states):
            payoff = stage[s]
            strategies = cached.get(s)
            if strategies is not None:
                pi1, pi2 = strategies
                guaranteed = float((pi1 @ payoff).min())
                upper = float((payoff @ pi2).max())
                if upper - guaranteed <= reuse_tolerance:
                    updated[s] = upper
                    continue
            value, pi1, pi2 = solve_matrix_game(payoff)
            result.matrix_games += 1
            cached[s] = (pi1, pi2)
            updated[s] = value
        updated = np.minimum(updated, values)
        residual = float(np.max(np.abs(updated - values)))
        values = updated
        result.residuals.append(residual)
        if residual < beta:
            result.converged = True
            break
        if time.perf_counter() - started > time_limit:
            logger.warning(f"上界の初期化が時間上限 {time_limit}s に達しました (残差 {residual:.4g})")
            break

    values = np.clip(values, bounds.L, bounds.U)
    result.values = values
    result.points = {k: (np.eye(len(v)), v) for k, v in _split_by_block(game, values).items()}
    result.seconds = time.perf_counter() - started
    logger.info(
        f"上界初期化: {len(result.residuals)} 反復, 残差 {result.residuals[-1]:.4g}, "
        f"行列ゲーム {result.matrix_games} 回, {result.seconds:.2f}s"
    )
    return result


def initial_bounds(
    game: Game, beta: Optional[float] = None, time_limit: Optional[float] = None, prune_growth: float = 0.10
) -> Tuple[LowerBound, UpperBound, LowerInit, UpperInit]:
    """初期化済みの Γ と Υ を作る"""
    bounds = utility_bounds(game)
    lower = lb_init(game, beta, time_limit)
    upper = ub_init(game, beta, time_limit)
    lb = LowerBound.from_initial(bounds, lower.alphas)
    ub = UpperBound.from_points(bounds, upper.points, prune_growth)
    return lb, ub, lower, upper
