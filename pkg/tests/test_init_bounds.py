"""
初期境界のテスト
"""
import numpy as np
import pytest

from app.services.domains import gen_random
from app.services.game import validate_game
from app.services.init_bounds import initial_bounds, lb_init, ub_init
from app.services.stage_solver import solve_matrix_game
from tests.conftest import single_state_file


def _shapley(game, values: np.ndarray) -> np.ndarray:
    """完全情報ゲームのベルマン作用素"""
    stage = game.rewards + game.gamma * (game.transition_matrix() @ values).reshape(game.rewards.shape)
    return np.array([solve_matrix_game(stage[s])[0] for s in range(game.n_states)])


def test_single_state_closed_form():
    game = validate_game(single_state_file(reward=1.0, gamma=0.5))
    lower = lb_init(game, beta=1e-8)
    upper = ub_init(game, beta=1e-8)
    assert lower.converged and upper.converged
    assert lower.values[0] == pytest.approx(2.0, abs=1e-6)
    assert upper.values[0] == pytest.approx(2.0, abs=1e-6)


def test_lower_never_exceeds_upper(random_game):
    lower = lb_init(random_game)
    upper = ub_init(random_game)
    assert np.all(lower.values <= upper.values + 1e-9)


def test_pennies_values(pennies):
    upper = ub_init(pennies, beta=1e-10)
    lower = lb_init(pennies, beta=1e-10)
    index = {name: i for i, name in enumerate(pennies.states)}
    # 完全情報なら2段目で必ず当てられる
    assert upper.values[index["sH"]] == pytest.approx(1 / 0.9)
    assert upper.values[index["s0"]] == pytest.approx(1.0)
    assert upper.values[index["sinf"]] == pytest.approx(0.0, abs=1e-8)
    # 一様戦略なら期待値0
    assert lower.values[index["sH"]] == pytest.approx(0.0, abs=1e-8)
    assert lower.values[index["s0"]] == pytest.approx(0.0, abs=1e-8)


def test_residuals_contract(random_game):
    lower = lb_init(random_game, beta=1e-6)
    upper = ub_init(random_game, beta=1e-6, reuse_tolerance=0.0)
    for residuals in (lower.residuals, upper.residuals):
        for previous, current in zip(residuals, residuals[1:]):
            assert current <= random_game.gamma * previous + 1e-7


def test_upper_points_are_block_vertices(random_game):
    upper = ub_init(random_game, beta=1e-6)
    assert upper.converged
    # 頂点の点集合として各ブロックに入る
    for k, (beliefs, values) in upper.points.items():
        assert beliefs.shape == (random_game.block_size(k), random_game.block_size(k))
        assert np.allclose(beliefs, np.eye(len(values)))


def test_time_limit_zero_still_returns_valid_bounds(random_game):
    lower = lb_init(random_game, time_limit=0.0)
    upper = ub_init(random_game, time_limit=0.0)
    assert len(lower.residuals) == 1 and not lower.converged
    assert len(upper.residuals) == 1 and not upper.converged
    lb, ub, _, _ = initial_bounds(random_game, time_limit=0.0)
    b = random_game.initial_belief
    assert lb.value(b) <= ub.value(b)


def test_shapley_operator_contracts():
    for seed in range(20):
        game = gen_random(3, 2, 2, 2, gamma=0.8, seed=seed)
        rng = np.random.default_rng(seed)
        alpha = rng.uniform(-5, 5, size=game.n_states)
        beta = rng.uniform(-5, 5, size=game.n_states)
        gap = np.max(np.abs(_shapley(game, alpha) - _shapley(game, beta)))
        assert gap <= game.gamma * np.max(np.abs(alpha - beta)) + 1e-7
