"""
ランダムな OS-POSG と tiger POMDP（性質テスト・オラクル照合用の小さなゲーム）
"""
from typing import Optional, Tuple

import numpy as np

from app.exceptions import GeneratorError
from app.models.schemas import GameFile, Outcome, RewardEntry, TransitionRow
from app.services.domains.builder import GameBuilder, check_gamma
from app.services.game import Game, validate_game


def random_game_file(
    n_states: int,
    n_actions1: int,
    n_actions2: int,
    n_observations: int = 1,
    gamma: float = 0.9,
    seed: int = 0,
    reward_range: Tuple[float, float] = (-1.0, 1.0),
    support: Optional[int] = None,
) -> GameFile:
    """
    単一ブロックの密なランダムゲーム
    遷移 T(o, s'|s, a1, a2) は Dirichlet(1)、support を与えると各行の非零要素数を制限
    """
    check_gamma(gamma)
    if min(n_states, n_actions1, n_actions2, n_observations) < 1:
        raise GeneratorError("状態・行動・観測の数は1以上必要です")
    low, high = reward_range
    if low > high:
        raise GeneratorError("報酬範囲が不正です", {"reward_range": reward_range})
    rng = np.random.default_rng(seed)
    states = [f"s{i}" for i in range(n_states)]
    actions1 = [f"a{i}" for i in range(n_actions1)]
    actions2 = [f"b{i}" for i in range(n_actions2)]
    observations = [f"o{i}" for i in range(n_observations)]
    n_outcomes = n_states * n_observations

    transitions = []
    rewards = []
    for s in range(n_states):
        for a1 in range(n_actions1):
            for a2 in range(n_actions2):
                probs = rng.dirichlet(np.ones(n_outcomes))
                if support is not None and support < n_outcomes:
                    keep = rng.choice(n_outcomes, size=support, replace=False)
                    mask = np.zeros(n_outcomes, dtype=bool)
                    mask[keep] = True
                    probs = np.where(mask, probs, 0.0)
                    probs /= probs.sum()
                out = [
                    Outcome(o=observations[k % n_observations], s2=states[k // n_observations], p=float(p))
                    for k, p in enumerate(probs)
                    if p > 0.0
                ]
                transitions.append(TransitionRow(s=states[s], a1=actions1[a1], a2=actions2[a2], out=out))
                rewards.append(
                    RewardEntry(s=states[s], a1=actions1[a1], a2=actions2[a2], r=float(rng.uniform(low, high)))
                )

    return GameFile(
        states=states,
        actions1=actions1,
        actions2=actions2,
        observations=observations,
        gamma=gamma,
        initial_belief={s: 1.0 / n_states for s in states},
        transitions=transitions,
        rewards=rewards,
        metadata={
            "family": "random",
            "n_states": n_states,
            "n_actions1": n_actions1,
            "n_actions2": n_actions2,
            "n_observations": n_observations,
            "gamma": gamma,
            "seed": seed,
        },
    )


def gen_random(
    n_states: int,
    n_actions1: int,
    n_actions2: int,
    n_observations: int = 1,
    gamma: float = 0.9,
    seed: int = 0,
    reward_range: Tuple[float, float] = (-1.0, 1.0),
    support: Optional[int] = None,
) -> Game:
    return validate_game(
        random_game_file(n_states, n_actions1, n_actions2, n_observations, gamma, seed, reward_range, support)
    )


TIGER_LEFT, TIGER_RIGHT = "tiger-left", "tiger-right"
TIGER_ACTIONS = ("listen", "open-left", "open-right")


def tiger_builder(gamma: float = 0.9, listen_accuracy: float = 0.85) -> GameBuilder:
    """プレイヤー2が行動1つだけの tiger 問題"""
    check_gamma(gamma)
    if not 0.5 <= listen_accuracy <= 1.0:
        raise GeneratorError("聴取精度は [0.5, 1] の範囲である必要があります", {"accuracy": listen_accuracy})

    def step(state, a1: int, a2: int):
        if a1 == 0:
            wrong = "hear-right" if state == TIGER_LEFT else "hear-left"
            right = "hear-left" if state == TIGER_LEFT else "hear-right"
            return [(right, state, listen_accuracy), (wrong, state, 1.0 - listen_accuracy)]
        # 扉を開けるとリセット
        return [(o, s2, 0.25) for o in ("hear-left", "hear-right") for s2 in (TIGER_LEFT, TIGER_RIGHT)]

    def reward(state, a1: int, a2: int) -> float:
        if a1 == 0:
            return -1.0
        opened_left = a1 == 1
        return -100.0 if opened_left == (state == TIGER_LEFT) else 10.0

    return GameBuilder(
        actions1=list(TIGER_ACTIONS),
        actions2=["noop"],
        observations=["hear-left", "hear-right"],
        gamma=gamma,
        initial={TIGER_LEFT: 0.5, TIGER_RIGHT: 0.5},
        step=step,
        reward=reward,
        state_name=str,
        metadata={"family": "tiger", "gamma": gamma, "listen_accuracy": listen_accuracy},
    )


def gen_tiger(gamma: float = 0.9, listen_accuracy: float = 0.85) -> Game:
    return tiger_builder(gamma, listen_accuracy).build(partitioned=False)
