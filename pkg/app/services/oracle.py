"""
小規模ゲーム用の厳密オラクル（テスト専用）
ステージ LP の構築経路はソルバー本体と共有しない
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from app.config import ORACLE_CONFIG
from app.exceptions import InvalidGame, SizeLimitExceeded
from app.services.game import Belief, Game
from app.services.lp import LE, EQ, LpModel, solve_lp
from app.services.play import Player1Policy, Player2Policy

logger = logging.getLogger(__name__)

SUPPORT_TOL = 1e-12


def _check_size(game: Game, horizon: int) -> None:
    limits = ORACLE_CONFIG
    if (
        game.n_states > limits["max_states"]
        or max(game.n_actions1, game.n_actions2) > limits["max_actions"]
        or game.n_observations > limits["max_observations"]
        or horizon > limits["max_horizon"]
    ):
        raise SizeLimitExceeded(
            "オラクルの規模上限を超えています",
            {
                "states": game.n_states,
                "actions": (game.n_actions1, game.n_actions2),
                "observations": game.n_observations,
                "horizon": horizon,
            },
        )


def _successor_support(game: Game, support: List[int], a1: int, o: int) -> List[int]:
    """(a1, o) の後で取りうる状態（プレイヤー2の全行動について）"""
    reached = set()
    for s in support:
        for a2 in range(game.n_actions2):
            for o2, s2, p in game.transitions[(s, a1, a2)]:
                if o2 == o and p > 0.0:
                    reached.add(s2)
    return sorted(reached)


@dataclass
class _History:
    depth: int
    support: List[int]
    parent: Optional[int] = None
    parent_action: Optional[int] = None
    children: Dict[Tuple[int, int], int] = field(default_factory=dict)


def _enumerate_histories(game: Game, b: Belief, horizon: int) -> List[_History]:
    root_support = [int(s) for s in game.blocks[b.block].states[b.probs > 0]]
    histories = [_History(0, root_support)]
    row_estimate = 0
    frontier = [0]
    while frontier:
        h = frontier.pop()
        node = histories[h]
        row_estimate += 1 + len(node.support) * game.n_actions2
        if row_estimate > ORACLE_CONFIG["max_lp_rows"]:
            raise SizeLimitExceeded("オラクル LP の行数が上限を超えます", {"rows": row_estimate})
        if node.depth + 1 >= horizon:
            continue
        for a1 in range(game.n_actions1):
            for o in range(game.n_observations):
                support = _successor_support(game, node.support, a1, o)
                if not support:
                    continue
                histories.append(_History(node.depth + 1, support, h, a1))
                node.children[(a1, o)] = len(histories) - 1
                frontier.append(len(histories) - 1)
    return histories


def finite_horizon_value(game: Game, b: Belief, horizon: int) -> float:
    """
    T ステージ打ち切りゲームの max-min 値
    プレイヤー1の行動・観測履歴ごとの実現重み x(h, a1) と、(h, s) ごとの
    プレイヤー2最適応答値 v(h, s) を変数とする1本の LP
    """
    if horizon < 0:
        raise ValueError("horizon は非負である必要があります")
    if horizon == 0:
        return 0.0
    _check_size(game, horizon)
    histories = _enumerate_histories(game, b, horizon)
    n_a1, n_a2 = game.n_actions1, game.n_actions2

    model = LpModel(f"oracle_T{horizon}")
    x = model.add_variables("x", len(histories) * n_a1).reshape(len(histories), n_a1)
    v_offset: List[Dict[int, int]] = []
    n_v = sum(len(h.support) for h in histories)
    v = model.add_variables("v", n_v, lb=-np.inf)
    cursor = 0
    for h in histories:
        v_offset.append({s: int(v[cursor + i]) for i, s in enumerate(h.support)})
        cursor += len(h.support)

    # 実現重みの整合性
    rows, cols, coefs = [], [], []
    for i, h in enumerate(histories):
        rows.extend([i] * n_a1)
        cols.extend(x[i].tolist())
        coefs.extend([1.0] * n_a1)
        if h.parent is not None:
            rows.append(i)
            cols.append(int(x[h.parent, h.parent_action]))
            coefs.append(-1.0)
    rhs = np.zeros(len(histories))
    rhs[0] = 1.0
    model.add_constraints("realization", rows, cols, coefs, EQ, rhs, count=len(histories))

    # v(h,s) ≤ Σ_a1 x(h,a1)·R(s,a1,a2) + γ Σ T(o,s'|s,a1,a2)·v(h·(a1,o), s')
    rows, cols, coefs = [], [], []
    r = 0
    for i, h in enumerate(histories):
        for s in h.support:
            for a2 in range(n_a2):
                acc: Dict[int, float] = {v_offset[i][s]: 1.0}
                for a1 in range(n_a1):
                    col = int(x[i, a1])
                    acc[col] = acc.get(col, 0.0) - game.rewards[s, a1, a2]
                    for o, s2, p in game.transitions[(s, a1, a2)]:
                        child = h.children.get((a1, o))
                        if child is None:
                            continue
                        col = v_offset[child][s2]
                        acc[col] = acc.get(col, 0.0) - game.gamma * p
                for col, coef in acc.items():
                    if coef != 0.0:
                        rows.append(r)
                        cols.append(col)
                        coefs.append(coef)
                r += 1
    model.add_constraints("best_response", rows, cols, coefs, LE, 0.0, count=r)

    states = game.blocks[b.block].states
    root = [v_offset[0][int(states[i])] for i in np.flatnonzero(b.probs > 0)]
    model.set_objective(root, b.probs[b.probs > 0], maximize=True)
    solution = solve_lp(model, raise_on_failure=True)
    logger.debug(
        f"オラクル LP: T={horizon}, {len(histories)} histories, {model.n_constraints} rows, "
        f"value={solution.objective_value:.6f}"
    )
    return solution.objective_value


def pomdp_reduction_value(game: Game, b: Belief, horizon: int) -> float:
    """|A2| = 1 のゲームを POMDP とみなした有限ホライズン値（到達可能信念上の後ろ向き帰納）"""
    if game.n_actions2 != 1:
        raise InvalidGame("プレイヤー2の行動が1つのゲームにのみ適用できます", {"actions2": game.n_actions2})
    if horizon < 0:
        raise ValueError("horizon は非負である必要があります")
    counter = [0]
    memo: Dict[Tuple, float] = {}

    def backup(weights: np.ndarray, t: int) -> float:
        if t == 0:
            return 0.0
        key = (t, tuple(np.round(weights, 12)))
        if key in memo:
            return memo[key]
        counter[0] += 1
        if counter[0] > ORACLE_CONFIG["max_history_nodes"]:
            raise SizeLimitExceeded("POMDP オラクルの信念ノード数が上限を超えます", {"horizon": horizon})
        best = -np.inf
        for a1 in range(game.n_actions1):
            value = float(weights @ game.rewards[:, a1, 0])
            successors: Dict[int, np.ndarray] = {}
            for s in np.flatnonzero(weights > 0):
                for o, s2, p in game.transitions[(int(s), a1, 0)]:
                    successors.setdefault(o, np.zeros(game.n_states))[s2] += weights[s] * p
            for nxt in successors.values():
                mass = nxt.sum()
                if mass > SUPPORT_TOL:
                    value += game.gamma * mass * backup(nxt / mass, t - 1)
            best = max(best, value)
        memo[key] = best
        return best

    return backup(game.to_global(b), horizon)


def best_response_to_player1(
    game: Game, p1_policy: Player1Policy, b: Belief, horizon: int
) -> float:
    """
    固定したプレイヤー1方策に対する、最適応答プレイヤー2のもとでの T ステージ値
    方策は現在の内部状態から評価する（呼び出し側で reset 済みであること）
    """
    counter = [0]

    def evaluate(policy: Player1Policy, support: List[int], t: int) -> Dict[int, float]:
        if t == 0:
            return {s: 0.0 for s in support}
        counter[0] += 1
        if counter[0] > ORACLE_CONFIG["max_history_nodes"]:
            raise SizeLimitExceeded("方策評価の履歴ノード数が上限を超えます", {"horizon": horizon})
        pi1 = policy.strategy().probs
        actions = [int(a) for a in np.flatnonzero(pi1 > SUPPORT_TOL)]
        continuation: Dict[Tuple[int, int], Dict[int, float]] = {}
        for a1 in actions:
            for o in range(game.n_observations):
                support2 = _successor_support(game, support, a1, o)
                if not support2:
                    continue
                child = policy.clone()
                child.observe(a1, o)
                continuation[(a1, o)] = evaluate(child, support2, t - 1)

        values: Dict[int, float] = {}
        for s in support:
            best = np.inf
            for a2 in range(game.n_actions2):
                total = 0.0
                for a1 in actions:
                    q = game.rewards[s, a1, a2]
                    for o, s2, p in game.transitions[(s, a1, a2)]:
                        q += game.gamma * p * continuation[(a1, o)][s2]
                    total += pi1[a1] * q
                best = min(best, total)
            values[s] = best
        return values

    states = game.blocks[b.block].states
    support = [int(states[i]) for i in np.flatnonzero(b.probs > 0)]
    values = evaluate(p1_policy.clone(), support, horizon)
    return float(sum(b.probs[game.local_index[s]] * values[s] for s in support))


def best_response_to_player2(
    game: Game, p2_policy: Player2Policy, b: Belief, horizon: int
) -> float:
    """固定したプレイヤー2方策に対する、最適応答プレイヤー1の T ステージ値"""
    counter = [0]

    def evaluate(policy: Player2Policy, weights: np.ndarray, t: int) -> float:
        if t == 0:
            return 0.0
        counter[0] += 1
        if counter[0] > ORACLE_CONFIG["max_history_nodes"]:
            raise SizeLimitExceeded("方策評価の履歴ノード数が上限を超えます", {"horizon": horizon})
        cond = policy.strategy().cond
        support = [int(s) for s in np.flatnonzero(weights > SUPPORT_TOL)]
        best = -np.inf
        for a1 in range(game.n_actions1):
            value = 0.0
            successors: Dict[int, np.ndarray] = {}
            for s in support:
                row = cond[game.local_index[s]]
                for a2 in np.flatnonzero(row > 0):
                    w = weights[s] * row[a2]
                    value += w * game.rewards[s, a1, a2]
                    for o, s2, p in game.transitions[(s, a1, int(a2))]:
                        successors.setdefault(o, np.zeros(game.n_states))[s2] += w * p
            for o, nxt in successors.items():
                if nxt.sum() <= SUPPORT_TOL:
                    continue
                child = policy.clone()
                child.observe(a1, o)
                value += game.gamma * evaluate(child, nxt, t - 1)
            best = max(best, value)
        return best

    return float(evaluate(p2_policy.clone(), game.to_global(b), horizon))
