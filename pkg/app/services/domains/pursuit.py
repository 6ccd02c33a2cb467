"""
追跡・回避ゲーム (pursuit-evasion)
追跡者 K 体（プレイヤー1）は左上、逃走者（プレイヤー2）は右下から開始。
追跡者は逃走者の位置を観測できず、捕獲時にのみ capture を観測する
"""
import itertools
from typing import List, Optional, Tuple

from app.config import DOMAIN_DEFAULTS
from app.exceptions import GeneratorError
from app.services.domains.builder import GameBuilder, check_gamma
from app.services.game import Game

MOVES = ("left", "right", "up", "down")
_DELTAS = {"left": (0, -1), "right": (0, 1), "up": (-1, 0), "down": (1, 0)}
TERMINAL = "T"

Cell = Tuple[int, int]


def _move(cell: Cell, move: str, rows: int, cols: int) -> Cell:
    """盤外への移動はその場に留まる"""
    dr, dc = _DELTAS[move]
    r, c = cell[0] + dr, cell[1] + dc
    if 0 <= r < rows and 0 <= c < cols:
        return (r, c)
    return cell


def _cell_name(cell: Cell) -> str:
    return f"{cell[0]}_{cell[1]}"


def pursuit_builder(
    rows: int,
    cols: int,
    pursuers: int = 1,
    gamma: Optional[float] = None,
    capture_reward: Optional[float] = None,
) -> GameBuilder:
    """
    rows×cols 盤の追跡・回避ゲームを組み立てる
    盤は2マス以上あればよく、1×2 のような1行・1列の盤も受け付ける
    """
    gamma = DOMAIN_DEFAULTS["gamma"] if gamma is None else gamma
    capture_reward = DOMAIN_DEFAULTS["capture_reward"] if capture_reward is None else capture_reward
    check_gamma(gamma)
    if rows < 1 or cols < 1 or rows * cols < 2:
        raise GeneratorError("盤面は2マス以上必要です", {"rows": rows, "cols": cols})
    if pursuers < 1:
        raise GeneratorError("追跡者は1体以上必要です", {"pursuers": pursuers})

    joint_moves: List[Tuple[str, ...]] = list(itertools.product(MOVES, repeat=pursuers))
    actions1 = ["+".join(m) for m in joint_moves]
    start = (tuple([(0, 0)] * pursuers), (rows - 1, cols - 1))

    def step(state, a1: int, a2: int):
        if state == TERMINAL:
            return [("none", TERMINAL, 1.0)]
        positions, evader = state
        moved = tuple(_move(p, m, rows, cols) for p, m in zip(positions, joint_moves[a1]))
        evader = _move(evader, MOVES[a2], rows, cols)
        if evader in moved:
            return [("capture", TERMINAL, 1.0)]
        return [("none", (moved, evader), 1.0)]

    def reward(state, a1: int, a2: int) -> float:
        if state == TERMINAL:
            return 0.0
        (kind, _, _), = step(state, a1, a2)
        return capture_reward if kind == "capture" else 0.0

    def state_name(state) -> str:
        if state == TERMINAL:
            return TERMINAL
        positions, evader = state
        return "p" + "-".join(_cell_name(p) for p in positions) + "|e" + _cell_name(evader)

    def block_of(state) -> str:
        if state == TERMINAL:
            return TERMINAL
        return "p" + "-".join(_cell_name(p) for p in state[0])

    return GameBuilder(
        actions1=actions1,
        actions2=list(MOVES),
        observations=["none", "capture"],
        gamma=gamma,
        initial={start: 1.0},
        step=step,
        reward=reward,
        state_name=state_name,
        block_of=block_of,
        metadata={"family": "pursuit", "rows": rows, "cols": cols, "pursuers": pursuers, "gamma": gamma},
    )


def gen_pursuit(
    rows: int,
    cols: int,
    pursuers: int = 1,
    gamma: Optional[float] = None,
    capture_reward: Optional[float] = None,
) -> Game:
    """
    追跡・回避ゲームを生成する（ブロック = 追跡者の位置）
    rows, cols ≥ 1 かつ rows·cols ≥ 2。最小の盤は 1×2
    """
    return pursuit_builder(rows, cols, pursuers, gamma, capture_reward).build()
