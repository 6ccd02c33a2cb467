"""
テスト共通フィクスチャ
小さなゲーム（1状態ゲーム・マッチングペニー・ランダムゲーム・tiger）と求解済み境界
"""
from typing import Dict, List, Optional, Tuple

import numpy as np
import pytest

from app.config import SolverConfig, settings
from app.models.schemas import GameFile, Outcome, RewardEntry, TransitionRow
from app.services.domains import gen_matching_pennies, gen_pursuit, gen_random, gen_tiger
from app.services.game import Game, validate_game
from app.services.hsvi import solve

RUN_SLOW = settings.RUN_SLOW_TESTS


def pytest_collection_modifyitems(config, items):
    if RUN_SLOW:
        return
    skip_slow = pytest.mark.skip(reason="OSPOSG_RUN_SLOW=1 で実行")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def make_game_file(
    states: List[str],
    actions1: List[str],
    actions2: List[str],
    observations: List[str],
    transitions: Dict[Tuple[str, str, str], List[Tuple[str, str, float]]],
    rewards: Optional[Dict[Tuple[str, str, str], float]] = None,
    gamma: float = 0.9,
    initial: Optional[Dict[str, float]] = None,
    partitions=None,
) -> GameFile:
    """辞書で書いた遷移からゲームファイルを作る"""
    return GameFile(
        states=states,
        actions1=actions1,
        actions2=actions2,
        observations=observations,
        gamma=gamma,
        initial_belief=initial or {states[0]: 1.0},
        partitions=partitions,
        transitions=[
            TransitionRow(s=s, a1=a1, a2=a2, out=[Outcome(o=o, s2=s2, p=p) for o, s2, p in out])
            for (s, a1, a2), out in transitions.items()
        ],
        rewards=[RewardEntry(s=s, a1=a1, a2=a2, r=r) for (s, a1, a2), r in (rewards or {}).items()],
    )


def single_state_file(reward: float = 1.0, gamma: float = 0.5) -> GameFile:
    return make_game_file(
        ["s"], ["a"], ["b"], ["o"],
        {("s", "a", "b"): [("o", "s", 1.0)]},
        {("s", "a", "b"): reward},
        gamma=gamma,
    )


def signal_game_file() -> GameFile:
    """観測がプレイヤー2の行動だけで決まる2状態ゲーム"""
    transitions = {}
    for s in ("x", "y"):
        transitions[(s, "a", "l")] = [("ol", "x", 1.0)]
        transitions[(s, "a", "r")] = [("or", "y", 1.0)]
    return make_game_file(
        ["x", "y"], ["a"], ["l", "r"], ["ol", "or"], transitions,
        {("x", "a", "l"): 1.0, ("y", "a", "r"): -1.0},
        initial={"x": 0.5, "y": 0.5},
    )


@pytest.fixture
def single_state_game() -> Game:
    return validate_game(single_state_file())


@pytest.fixture
def signal_game() -> Game:
    return validate_game(signal_game_file())


@pytest.fixture
def pennies() -> Game:
    return gen_matching_pennies(0.9)


@pytest.fixture
def random_game() -> Game:
    return gen_random(3, 2, 2, 2, gamma=0.9, seed=3)


@pytest.fixture
def tiger() -> Game:
    return gen_tiger(0.9)


@pytest.fixture(scope="session")
def solved_pennies():
    """ε = 0.02·(U−L) まで解いたマッチングペニー"""
    game = gen_matching_pennies(0.9)
    span = 2 * (1 / 0.9) / (1 - 0.9)
    lb, ub, stats = solve(game, SolverConfig(epsilon=0.02 * span, seed=0))
    return game, lb, ub, stats


@pytest.fixture(scope="session")
def solved_pursuit():
    """ε = 1 まで解いた 1×2 盤の追跡・回避ゲーム"""
    game = gen_pursuit(1, 2, 1, gamma=0.95)
    lb, ub, stats = solve(game, SolverConfig(epsilon=1.0, seed=0))
    return game, lb, ub, stats


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
