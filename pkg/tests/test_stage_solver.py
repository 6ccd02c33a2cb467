"""
ステージゲーム LP のテスト
"""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from app.exceptions import InfeasibleGadget, MissingSubgameAlpha
from app.services.bounds import AlphaVector, LowerBound
from app.services.domains import gen_random
from app.services.game import StageStrategy1, utility_bounds
from app.services.hsvi import sample_beliefs
from app.services.init_bounds import initial_bounds
from app.services.stage_solver import (
    resolve_gadget,
    solve_matrix_game,
    solve_stage_lb,
    solve_stage_lb_dual,
    solve_stage_ub,
    valcomp,
)


class TestMatrixGame:
    def test_matching_pennies_matrix(self):
        value, pi1, pi2 = solve_matrix_game(np.array([[1.0, -1.0], [-1.0, 1.0]]))
        assert value == pytest.approx(0.0, abs=1e-9)
        assert pi1 == pytest.approx([0.5, 0.5], abs=1e-7)
        assert pi2 == pytest.approx([0.5, 0.5], abs=1e-7)

    def test_saddle_point_is_pure(self):
        value, pi1, pi2 = solve_matrix_game(np.array([[3.0, 1.0], [4.0, 2.0]]))
        assert value == 2.0
        assert pi1.tolist() == [0.0, 1.0]
        assert pi2.tolist() == [0.0, 1.0]

    def test_random_games_are_minimax(self, rng):
        for _ in range(20):
            payoff = rng.uniform(-1, 1, size=(3, 4))
            value, pi1, pi2 = solve_matrix_game(payoff)
            assert (pi1 @ payoff).min() == pytest.approx(value, abs=1e-7)
            assert (payoff @ pi2).max() == pytest.approx(value, abs=1e-7)


class TestStageLp:
    def test_primal_and_dual_agree(self, random_game, rng):
        lb, _ub, _, _ = initial_bounds(random_game)
        for b in sample_beliefs(random_game, 0, 50, rng):
            primal = solve_stage_lb(random_game, b, lb)
            dual = solve_stage_lb_dual(random_game, b, lb)
            assert primal.value == pytest.approx(dual.value, abs=1e-6)

    def test_composed_alpha_certifies_value(self, random_game, rng):
        lb, _ub, _, _ = initial_bounds(random_game)
        for b in sample_beliefs(random_game, 0, 10, rng):
            solution = solve_stage_lb(random_game, b, lb)
            assert solution.composed_alpha.evaluate(b) == pytest.approx(solution.value, abs=1e-6)
            assert solution.pi1.probs.sum() == pytest.approx(1.0)
            assert solution.pi2.cond.sum(axis=1) == pytest.approx(np.ones(3))

    def test_upper_stage_dominates_lower_stage(self, random_game, rng):
        lb, ub, _, _ = initial_bounds(random_game)
        for b in sample_beliefs(random_game, 0, 10, rng):
            assert solve_stage_ub(random_game, b, ub).value >= solve_stage_lb(random_game, b, lb).value - 1e-6

    def test_pennies_first_stage(self, pennies):
        lb, ub, _, _ = initial_bounds(pennies)
        b = pennies.initial_belief
        lower = solve_stage_lb(pennies, b, lb).value
        upper = solve_stage_ub(pennies, b, ub).value
        assert lower <= upper + 1e-6

    def test_missing_subgame_alpha(self, pennies):
        with pytest.raises(MissingSubgameAlpha):
            valcomp(pennies, StageStrategy1.uniform(2), {}, pennies.initial_belief.block)


class TestResolveGadget:
    def test_feasible_gadget(self, random_game, rng):
        lb, _ub, _, _ = initial_bounds(random_game)
        b = sample_beliefs(random_game, 0, 1, rng)[0]
        rho = solve_stage_lb(random_game, b, lb).composed_alpha
        pi1, continuation = resolve_gadget(random_game, b, rho, lb)
        composed = valcomp(random_game, pi1, continuation, b.block)
        assert np.all(composed.values >= rho.values - 1e-6)

    def test_infeasible_gadget(self, pennies):
        lb, _ub, _, _ = initial_bounds(pennies)
        second = next(k for k, block in enumerate(pennies.blocks) if block.name == "second")
        b = pennies.uniform_belief(second)
        rho = AlphaVector(second, np.full(2, lb.utility.U))
        with pytest.raises(InfeasibleGadget):
            resolve_gadget(pennies, b, rho, lb)


def _bound_from(game, rows) -> LowerBound:
    lb = LowerBound.from_initial(utility_bounds(game), {0: AlphaVector(0, rows[0])})
    for row in rows[1:]:
        lb.insert(AlphaVector(0, row))
    return lb


def _random_rows(game, rng, count: int, high_margin: float = 0.0) -> np.ndarray:
    bounds = utility_bounds(game)
    return rng.uniform(bounds.L, bounds.U - high_margin, size=(count, game.block_size(0)))


def _sup_difference(v1: LowerBound, v2: LowerBound) -> float:
    """sup_b (v1(b) − v2(b))。α ごとに max_b min_β (α − β)·b の行列ゲームを解く"""
    beta = v2.alphas(0)
    return max(solve_matrix_game((alpha - beta).T)[0] for alpha in v1.alphas(0))


def _sup_norm(v1: LowerBound, v2: LowerBound) -> float:
    return max(_sup_difference(v1, v2), _sup_difference(v2, v1))


class TestStageOperator:
    """下界ステージ演算子 H の縮小性と単調性"""

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_contraction_in_sup_norm(self, seed):
        rng = np.random.default_rng(seed)
        game = gen_random(2 + seed % 2, 2, 2, 2, gamma=0.9, seed=seed)
        v1 = _bound_from(game, _random_rows(game, rng, 4))
        v2 = _bound_from(game, _random_rows(game, rng, 4))
        norm = _sup_norm(v1, v2)
        for b in sample_beliefs(game, 0, 50, rng):
            gap = solve_stage_lb(game, b, v1).value - solve_stage_lb(game, b, v2).value
            assert abs(gap) <= game.gamma * norm + 1e-5

    def test_sup_norm_is_attained_inside_the_simplex(self):
        game = gen_random(2, 2, 2, 2, gamma=0.9, seed=0)
        bounds = utility_bounds(game)
        middle = (bounds.L + bounds.U) / 2
        # 頂点では差 0、b = (1/2, 1/2) で差 1/2
        tent = _bound_from(game, np.array([[middle + 1.0, middle], [middle, middle + 1.0]]))
        flat = _bound_from(game, np.array([[middle + 1.0, middle + 1.0]]))
        assert _sup_difference(flat, tent) == pytest.approx(0.5, abs=1e-7)
        assert _sup_difference(tent, flat) == pytest.approx(0.0, abs=1e-7)

    @pytest.mark.parametrize("seed", range(20))
    def test_constant_shift_moves_value_by_gamma(self, seed):
        rng = np.random.default_rng(seed)
        game = gen_random(2 + seed % 2, 2, 2, 2, gamma=0.9, seed=seed)
        shift = 0.1 * utility_bounds(game).span
        rows = _random_rows(game, rng, 4, high_margin=shift)
        low, high = _bound_from(game, rows), _bound_from(game, rows + shift)
        assert _sup_norm(low, high) == pytest.approx(shift, abs=1e-7)
        for b in sample_beliefs(game, 0, 10, rng):
            moved = solve_stage_lb(game, b, high).value - solve_stage_lb(game, b, low).value
            assert moved == pytest.approx(game.gamma * shift, abs=1e-6)

    @pytest.mark.parametrize("seed", range(20))
    def test_monotone(self, seed):
        rng = np.random.default_rng(seed)
        game = gen_random(2 + seed % 2, 2, 2, 2, gamma=0.9, seed=seed)
        low = _bound_from(game, _random_rows(game, rng, 3))
        high = low.copy()
        for row in _random_rows(game, rng, 3):
            high.insert(AlphaVector(0, row))
        grid = sample_beliefs(game, 0, 200, rng)
        assert all(low.value(b) <= high.value(b) + 1e-9 for b in grid)
        for b in grid[:50]:
            assert solve_stage_lb(game, b, low).value <= solve_stage_lb(game, b, high).value + 1e-6
