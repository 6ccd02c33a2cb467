"""
2段階のマッチングペニー
1段目でプレイヤー2が硬貨の面を選び（プレイヤー1の行動は無効）、
2段目でプレイヤー1が面を当てると 1/γ、外すと −1/γ。その後は報酬0の吸収状態
"""
from typing import Optional

from app.services.domains.builder import GameBuilder, check_gamma
from app.services.game import Game

S0, HEADS, TAILS, SINK = "s0", "sH", "sT", "sinf"
SIDES = ("H", "T")


def pennies_builder(gamma: float = 0.9) -> GameBuilder:
    check_gamma(gamma)

    def step(state, a1: int, a2: int):
        if state == S0:
            return [("none", HEADS if a2 == 0 else TAILS, 1.0)]
        return [("none", SINK, 1.0)]

    def reward(state, a1: int, a2: int) -> float:
        if state in (HEADS, TAILS):
            guessed = (state == HEADS) == (a1 == 0)
            return (1.0 if guessed else -1.0) / gamma
        return 0.0

    blocks = {S0: "first", HEADS: "second", TAILS: "second", SINK: "sink"}
    return GameBuilder(
        actions1=list(SIDES),
        actions2=list(SIDES),
        observations=["none"],
        gamma=gamma,
        initial={S0: 1.0},
        step=step,
        reward=reward,
        state_name=str,
        block_of=blocks.get,
        metadata={"family": "pennies", "gamma": gamma},
    )


def gen_matching_pennies(gamma: Optional[float] = None) -> Game:
    return pennies_builder(0.9 if gamma is None else gamma).build()
