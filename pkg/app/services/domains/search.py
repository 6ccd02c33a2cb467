"""
侵入者探索ゲーム (search game)
攻撃者（プレイヤー2）は出発点 A から幅 W の2つの検問ゾーンを抜けて目標 T を目指す。
防御側ユニット（プレイヤー1）は各ゾーン内を左右に動き、攻撃者と同じ地点にいれば捕獲
"""
import itertools
from typing import List, Optional, Tuple

from app.config import DOMAIN_DEFAULTS
from app.exceptions import GeneratorError
from app.services.domains.builder import GameBuilder, check_gamma
from app.services.game import Game

UNIT_MOVES = ("left", "stay", "right")
_UNIT_DELTAS = {"left": -1, "stay": 0, "right": 1}
CONFIGS = {"1-1": (1, 1), "2-1": (2, 1)}
END = "end"
START = "A"


def _start_positions(units: int, width: int) -> Tuple[int, ...]:
    if units == 1:
        return (width // 2,)
    return (0, width - 1)


def search_builder(
    width: int,
    config: str = "1-1",
    gamma: Optional[float] = None,
    breach_penalty: Optional[float] = None,
) -> GameBuilder:
    gamma = DOMAIN_DEFAULTS["gamma"] if gamma is None else gamma
    breach_penalty = DOMAIN_DEFAULTS["breach_penalty"] if breach_penalty is None else breach_penalty
    check_gamma(gamma)
    if width < 2:
        raise GeneratorError("ゾーンの幅は2以上必要です", {"width": width})
    if config not in CONFIGS:
        raise GeneratorError("不明な防御配置です", {"config": config, "choices": list(CONFIGS)})

    per_zone = CONFIGS[config]
    zone_of_unit = [z for z, count in enumerate(per_zone, start=1) for _ in range(count)]
    n_units = len(zone_of_unit)
    joint_moves: List[Tuple[str, ...]] = list(itertools.product(UNIT_MOVES, repeat=n_units))
    actions1 = ["+".join(m) for m in joint_moves]
    actions2 = ["wait"] + [f"move:{j}" for j in range(width)]
    units0 = tuple(p for count in per_zone for p in _start_positions(count, width))
    start = (units0, START)

    def attacker_move(pos, a2: int):
        """攻撃者の移動先。T に到達したら 'T'"""
        if a2 == 0:
            return pos
        j = a2 - 1
        if pos == START:
            return (1, j)
        zone, i = pos
        if zone == 1:
            return (2, j) if abs(i - j) <= 1 else pos
        return "T"

    def transition(state, a1: int, a2: int):
        if state == END:
            return "none", END, 0.0
        units, pos = state
        moved = tuple(
            min(max(u + _UNIT_DELTAS[m], 0), width - 1) for u, m in zip(units, joint_moves[a1])
        )
        target = attacker_move(pos, a2)
        if target == "T":
            return END, END, breach_penalty
        if target != START:
            zone, j = target
            if any(z == zone and u == j for z, u in zip(zone_of_unit, moved)):
                return END, END, 0.0
        return "none", (moved, target), 0.0

    def step(state, a1: int, a2: int):
        if state == END:
            return [(END, END, 1.0)]
        o, s2, _ = transition(state, a1, a2)
        return [(o, s2, 1.0)]

    def reward(state, a1: int, a2: int) -> float:
        return transition(state, a1, a2)[2]

    def state_name(state) -> str:
        if state == END:
            return END
        units, pos = state
        where = pos if pos == START else f"z{pos[0]}_{pos[1]}"
        return "u" + "-".join(map(str, units)) + "|" + where

    def block_of(state) -> str:
        if state == END:
            return END
        return "u" + "-".join(map(str, state[0]))

    return GameBuilder(
        actions1=actions1,
        actions2=actions2,
        observations=["none", END],
        gamma=gamma,
        initial={start: 1.0},
        step=step,
        reward=reward,
        state_name=state_name,
        block_of=block_of,
        metadata={"family": "search", "width": width, "config": config, "gamma": gamma},
    )


def gen_search(
    width: int,
    config: str = "1-1",
    gamma: Optional[float] = None,
    breach_penalty: Optional[float] = None,
) -> Game:
    """探索ゲームを生成する（ブロック = 防御ユニットの位置）"""
    return search_builder(width, config, gamma, breach_penalty).build()
