"""
ステージゲーム [HV](b) の LP 解法
- 下界 Γ: 主 LP（π1, λ̂, V）と明示的な双対 LP（π2, τ̂, V̂）
- 上界 Υ: 双対 LP の V̂ を射影ブロックで置き換えた LP
- 価値合成 valcomp とガジェット制約付き再解法
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from app.config import TOLERANCE_CONFIG
from app.exceptions import (
    CrossBlockEvaluation,
    InfeasibleGadget,
    LpFailure,
    MissingSubgameAlpha,
)
from app.services.bounds import AlphaVector, LowerBound, UpperBound
from app.services.game import (
    Belief,
    BlockModel,
    Game,
    StageStrategy1,
    StageStrategy2,
)
from app.services.lp import EQ, GE, LE, LpModel, LpStatus, solve_lp

logger = logging.getLogger(__name__)

SUPPORT_TOL = TOLERANCE_CONFIG["support"]

PairKey = Tuple[int, int]


@dataclass
class StageSolutionLB:
    """下界のステージゲーム解"""
    value: float
    pi1: StageStrategy1
    alpha_selection: Dict[PairKey, np.ndarray]  # λ̂（非正規化、和 = π1(a1)）
    composed_alpha: AlphaVector
    pi2: StageStrategy2
    continuation: Dict[PairKey, AlphaVector] = field(default_factory=dict)  # ᾱ


@dataclass
class StageSolutionDual:
    """下界の双対 LP の解"""
    value: float
    pi1: StageStrategy1
    pi2: StageStrategy2


@dataclass
class StageSolutionUB:
    """上界のステージゲーム解"""
    value: float
    pi1: StageStrategy1
    pi2: StageStrategy2


def _normalized_pi1(raw: np.ndarray) -> StageStrategy1:
    probs = np.clip(np.asarray(raw, dtype=float), 0.0, None)
    probs[probs < SUPPORT_TOL] = 0.0
    total = probs.sum()
    if total <= 0.0:
        raise LpFailure("LP から有効な π1 が得られませんでした", {"raw": raw.tolist()})
    return StageStrategy1(probs / total)


def _reward_coefficients(model: BlockModel, n_a2: int) -> np.ndarray:
    """行 (s, a2)、列 a1 の報酬行列"""
    n, n_a1, _ = model.rewards.shape
    return model.rewards.transpose(0, 2, 1).reshape(n * n_a2, n_a1)


def valcomp(
    game: Game, pi1: StageStrategy1, alphas: Dict[PairKey, AlphaVector], block: int
) -> AlphaVector:
    """
    価値合成
    valcomp(s) = min_a2 Σ_a1 π1(a1)[R(s,a1,a2) + γ Σ_{o,s'} T(o,s'|s,a1,a2)·α_{a1,o}(s')]
    """
    model = game.block_model(block)
    n, n_a2 = model.n_states, game.n_actions2
    values = np.einsum("a,iab->ib", pi1.probs, model.rewards)
    for pair in model.pairs:
        weight = pi1.probs[pair.a1]
        alpha = alphas.get((pair.a1, pair.o))
        if alpha is None:
            if weight > SUPPORT_TOL:
                raise MissingSubgameAlpha(
                    "後続部分ゲームの α ベクトルがありません",
                    {"a1": game.actions1[pair.a1], "o": game.observations[pair.o]},
                )
            continue
        if alpha.block != pair.successor:
            raise CrossBlockEvaluation(
                "後続 α ベクトルのブロックが一致しません", {"expected": pair.successor, "got": alpha.block}
            )
        if weight == 0.0:
            continue
        values += game.gamma * weight * (pair.kernel @ alpha.values).reshape(n, n_a2)
    return AlphaVector(block, values.min(axis=1))


@dataclass
class _LowerStageLp:
    model: LpModel
    model_block: BlockModel
    pi1: np.ndarray
    lam: List[np.ndarray]
    value: np.ndarray
    best_response: np.ndarray
    gammas: List[np.ndarray]


def _build_lower_stage_lp(game: Game, b: Belief, lb: LowerBound, name: str) -> _LowerStageLp:
    """
    max Σ_s b(s)V(s)
      V(s) ≤ Σ_a1 π1(a1)R(s,a1,a2) + γ Σ_{a1,o} Σ_s' T(o,s'|s,a1,a2) Σ_i λ̂_i α_i(s')  ∀(s,a2)
      Σ_i λ̂_i^{a1,o} = π1(a1),  Σ π1 = 1
    α̂ = Σ λ̂_i α_i は代入して消去している
    """
    bm = game.block_model(b.block)
    n, n_a1, n_a2 = bm.n_states, game.n_actions1, game.n_actions2
    model = LpModel(name)
    pi1 = model.add_variables("pi1", n_a1)
    gammas = [lb.alphas(pair.successor) for pair in bm.pairs]
    lam = [
        model.add_variables(f"lambda_{pair.a1}_{pair.o}", len(g)) for pair, g in zip(bm.pairs, gammas)
    ]
    value = model.add_variables("V", n, lb=-np.inf)
    model.set_objective(value, b.probs, maximize=True)

    n_rows = n * n_a2
    r = np.arange(n_rows)
    rows, cols, coefs = [r], [value[r // n_a2]], [np.ones(n_rows)]
    reward = _reward_coefficients(bm, n_a2)
    rr, aa = np.nonzero(reward)
    rows.append(rr)
    cols.append(pi1[aa])
    coefs.append(-reward[rr, aa])
    for pair, gamma_set, cols_lam in zip(bm.pairs, gammas, lam):
        continuation = np.asarray(pair.kernel @ gamma_set.T)
        rr, jj = np.nonzero(continuation)
        rows.append(rr)
        cols.append(cols_lam[jj])
        coefs.append(-game.gamma * continuation[rr, jj])
    best_response = model.add_constraints(
        "best_response", np.concatenate(rows), np.concatenate(cols), np.concatenate(coefs), LE, 0.0,
        count=n_rows,
    )
    for pair, cols_lam in zip(bm.pairs, lam):
        model.add_constraint(
            f"consistency_{pair.a1}_{pair.o}",
            np.append(cols_lam, pi1[pair.a1]),
            np.append(np.ones(len(cols_lam)), -1.0),
            EQ,
            0.0,
        )
    model.add_constraint("simplex", pi1, 1.0, EQ, 1.0)
    return _LowerStageLp(model, bm, pi1, lam, value, best_response, gammas)


def _continuations(
    lp: _LowerStageLp, primal: np.ndarray, pi1: StageStrategy1, lb: LowerBound
) -> Tuple[Dict[PairKey, np.ndarray], Dict[PairKey, AlphaVector]]:
    """λ̂/π1 で ᾱ を復元する。π1(a1)≈0 の部分ゲームは初期 α ベクトル"""
    selection: Dict[PairKey, np.ndarray] = {}
    continuation: Dict[PairKey, AlphaVector] = {}
    for pair, gamma_set, cols_lam in zip(lp.model_block.pairs, lp.gammas, lp.lam):
        key = (pair.a1, pair.o)
        weights = np.clip(primal[cols_lam], 0.0, None)
        selection[key] = weights
        total = weights.sum()
        if pi1.probs[pair.a1] < SUPPORT_TOL or total <= SUPPORT_TOL:
            continuation[key] = lb.initial_alpha(pair.successor)
        else:
            continuation[key] = AlphaVector(pair.successor, (weights / total) @ gamma_set)
    return selection, continuation


def solve_stage_lb(game: Game, b: Belief, lb: LowerBound) -> StageSolutionLB:
    """[H uv](b) を主 LP で解く。π2 は最適応答制約の双対値から得る"""
    lp = _build_lower_stage_lp(game, b, lb, "stage_lb")
    sol = solve_lp(lp.model, raise_on_failure=True)
    pi1 = _normalized_pi1(sol.values(lp.pi1))
    selection, continuation = _continuations(lp, sol.primal, pi1, lb)
    composed = valcomp(game, pi1, continuation, b.block)
    joint = np.clip(sol.duals(lp.best_response), 0.0, None).reshape(lp.model_block.n_states, game.n_actions2)
    pi2 = StageStrategy2.from_joint(joint, b.probs)
    return StageSolutionLB(
        value=sol.objective_value,
        pi1=pi1,
        alpha_selection=selection,
        composed_alpha=composed,
        pi2=pi2,
        continuation=continuation,
    )


def _add_dual_core(model: LpModel, game: Game, bm: BlockModel, b: Belief):
    """
    双対側の共通部分: V, π2(s∧a2), τ̂^{a1,o}, V̂^{a1,o} と
    τ̂ = Σ π2(s∧a2)T、Σ_a2 π2(s∧a2) = b(s)、最適応答制約 (a1 ごと)
    """
    n, n_a1, n_a2 = bm.n_states, game.n_actions1, game.n_actions2
    value = model.add_variable("V", lb=-np.inf)
    pi2 = model.add_variables("pi2", n * n_a2)
    taus = [
        model.add_variables(f"tau_{pair.a1}_{pair.o}", pair.kernel.shape[1], lb=-np.inf) for pair in bm.pairs
    ]
    vhat = model.add_variables("Vhat", len(bm.pairs), lb=-np.inf)
    model.set_objective(value, 1.0, maximize=False)

    # V − Σ π2(s∧a2)R(s,a1,a2) − γ Σ_o V̂^{a1,o} ≥ 0
    reward = _reward_coefficients(bm, n_a2)
    rr, aa = np.nonzero(reward)
    pair_a1 = np.array([pair.a1 for pair in bm.pairs], dtype=int)
    best_response = model.add_constraints(
        "best_response",
        np.concatenate([np.arange(n_a1), aa, pair_a1]),
        np.concatenate([np.full(n_a1, value), pi2[rr], vhat]),
        np.concatenate([np.ones(n_a1), -reward[rr, aa], np.full(len(pair_a1), -game.gamma)]),
        GE,
        0.0,
        count=n_a1,
    )
    for pair, cols_tau in zip(bm.pairs, taus):
        kernel = pair.kernel.tocoo()
        n_succ = len(cols_tau)
        model.add_constraints(
            f"tau_{pair.a1}_{pair.o}",
            np.concatenate([np.arange(n_succ), kernel.col]),
            np.concatenate([cols_tau, pi2[kernel.row]]),
            np.concatenate([np.ones(n_succ), -kernel.data]),
            EQ,
            0.0,
            count=n_succ,
        )
    model.add_constraints(
        "marginal", np.repeat(np.arange(n), n_a2), pi2, np.ones(n * n_a2), EQ, b.probs, count=n
    )
    return value, pi2, taus, vhat, best_response


def _dual_strategies(sol, game: Game, bm: BlockModel, b: Belief, pi2_cols, best_response):
    pi1 = _normalized_pi1(sol.duals(best_response))
    joint = np.clip(sol.values(pi2_cols), 0.0, None).reshape(bm.n_states, game.n_actions2)
    return pi1, StageStrategy2.from_joint(joint, b.probs)


def solve_stage_lb_dual(game: Game, b: Belief, lb: LowerBound) -> StageSolutionDual:
    """[H uv](b) を明示的な双対 LP で解く（V̂ ≥ τ̂·α_i）"""
    bm = game.block_model(b.block)
    model = LpModel("stage_lb_dual")
    value, pi2, taus, vhat, best_response = _add_dual_core(model, game, bm, b)
    for p, (pair, cols_tau) in enumerate(zip(bm.pairs, taus)):
        gamma_set = lb.alphas(pair.successor)
        m, n_succ = gamma_set.shape
        model.add_constraints(
            f"support_{pair.a1}_{pair.o}",
            np.concatenate([np.arange(m), np.repeat(np.arange(m), n_succ)]),
            np.concatenate([np.full(m, vhat[p]), np.tile(cols_tau, m)]),
            np.concatenate([np.ones(m), -gamma_set.ravel()]),
            GE,
            0.0,
            count=m,
        )
    sol = solve_lp(model, raise_on_failure=True)
    pi1, pi2_strategy = _dual_strategies(sol, game, bm, b, pi2, best_response)
    return StageSolutionDual(value=sol.objective_value, pi1=pi1, pi2=pi2_strategy)


def solve_stage_ub(game: Game, b: Belief, ub: UpperBound) -> StageSolutionUB:
    """
    [H ov](b) を解く
    V̂^{a1,o} = Σ λ_i y_i + δ Σ Δ、Δ ≥ |Σ λ_i b_i − τ̂|、Σ λ = Σ τ̂
    """
    bm = game.block_model(b.block)
    model = LpModel("stage_ub")
    value, pi2, taus, vhat, best_response = _add_dual_core(model, game, bm, b)
    delta = ub.delta
    for p, (pair, cols_tau) in enumerate(zip(bm.pairs, taus)):
        beliefs, values = ub.points(pair.successor)
        m, n_succ = beliefs.shape
        lam = model.add_variables(f"lambda_{pair.a1}_{pair.o}", m)
        dev = model.add_variables(f"Delta_{pair.a1}_{pair.o}", n_succ)
        model.add_constraint(
            f"projection_{pair.a1}_{pair.o}",
            np.concatenate([[vhat[p]], lam, dev]),
            np.concatenate([[1.0], -values, np.full(n_succ, -delta)]),
            EQ,
            0.0,
        )
        s_idx, i_idx = np.nonzero(beliefs.T)
        coef = beliefs.T[s_idx, i_idx]
        local = np.arange(n_succ)
        # Δ ≥ Σλ b_i − τ̂
        model.add_constraints(
            f"dev_pos_{pair.a1}_{pair.o}",
            np.concatenate([local, local, s_idx]),
            np.concatenate([dev, cols_tau, lam[i_idx]]),
            np.concatenate([np.ones(n_succ), np.ones(n_succ), -coef]),
            GE,
            0.0,
            count=n_succ,
        )
        # Δ ≥ τ̂ − Σλ b_i
        model.add_constraints(
            f"dev_neg_{pair.a1}_{pair.o}",
            np.concatenate([local, local, s_idx]),
            np.concatenate([dev, cols_tau, lam[i_idx]]),
            np.concatenate([np.ones(n_succ), -np.ones(n_succ), coef]),
            GE,
            0.0,
            count=n_succ,
        )
        model.add_constraint(
            f"mass_{pair.a1}_{pair.o}",
            np.concatenate([lam, cols_tau]),
            np.concatenate([np.ones(m), -np.ones(n_succ)]),
            EQ,
            0.0,
        )
    sol = solve_lp(model, raise_on_failure=True)
    pi1, pi2_strategy = _dual_strategies(sol, game, bm, b, pi2, best_response)
    return StageSolutionUB(value=sol.objective_value, pi1=pi1, pi2=pi2_strategy)


def resolve_gadget(
    game: Game, b: Belief, rho: AlphaVector, lb: LowerBound
) -> Tuple[StageStrategy1, Dict[PairKey, AlphaVector]]:
    """
    ガジェット制約 valcomp(π1, ᾱ) ≥ ρ を課した主 LP を解く
    戻り値は (π1*, 部分ゲームごとの ᾱ*)
    """
    if rho.block != b.block:
        raise CrossBlockEvaluation("ガジェットと信念のブロックが一致しません", {"rho": rho.block, "belief": b.block})
    lp = _build_lower_stage_lp(game, b, lb, "resolve_gadget")
    lp.model.set_lower_bounds(lp.value, rho.values - TOLERANCE_CONFIG["gadget_slack"])
    sol = solve_lp(lp.model)
    if sol.status != LpStatus.OPTIMAL:
        logger.error(f"ガジェット制約付き再解法が実行不可能: block={b.block}, status={sol.status.value}")
        raise InfeasibleGadget(
            "ガジェットを満たす合成が存在しません（下界が max-justified ではありません）",
            {"block": game.blocks[b.block].name, "status": sol.status.value},
        )
    pi1 = _normalized_pi1(sol.values(lp.pi1))
    _, continuation = _continuations(lp, sol.primal, pi1, lb)
    return pi1, continuation


def solve_matrix_game(payoff: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    行列ゲーム（行プレイヤー最大化）の値と均衡戦略
    純粋戦略の鞍点があれば LP を解かずに返す
    """
    payoff = np.asarray(payoff, dtype=float)
    n_rows, n_cols = payoff.shape
    row_min = payoff.min(axis=1)
    col_max = payoff.max(axis=0)
    i, j = int(np.argmax(row_min)), int(np.argmin(col_max))
    if row_min[i] >= col_max[j]:
        pi1, pi2 = np.zeros(n_rows), np.zeros(n_cols)
        pi1[i], pi2[j] = 1.0, 1.0
        return float(payoff[i, j]), pi1, pi2

    model = LpModel("matrix_game")
    x = model.add_variables("x", n_rows)
    v = model.add_variable("v", lb=-np.inf)
    model.set_objective(v, 1.0, maximize=True)
    rows = model.add_constraints(
        "column",
        np.concatenate([np.arange(n_cols), np.tile(np.arange(n_cols), n_rows)]),
        np.concatenate([np.full(n_cols, v), np.repeat(x, n_cols)]),
        np.concatenate([np.ones(n_cols), -payoff.ravel()]),
        LE,
        0.0,
        count=n_cols,
    )
    model.add_constraint("simplex", x, 1.0, EQ, 1.0)
    sol = solve_lp(model, raise_on_failure=True)
    pi1 = np.clip(sol.values(x), 0.0, None)
    pi2 = np.clip(sol.duals(rows), 0.0, None)
    return sol.objective_value, pi1 / pi1.sum(), pi2 / pi2.sum()
