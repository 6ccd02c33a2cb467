"""
ドメイン生成の共通部品
初期状態から幅優先で到達可能な状態を列挙し、ゲームファイルを組み立てる
"""
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Hashable, List, Sequence, Tuple

from app.exceptions import GeneratorError
from app.models.schemas import (
    GameFile,
    Outcome,
    PartitionBlock,
    RewardEntry,
    SuccessorEntry,
    TransitionRow,
)
from app.services.game import Game, validate_game

logger = logging.getLogger(__name__)

State = Hashable
Step = Callable[[State, int, int], List[Tuple[str, State, float]]]


@dataclass
class GameBuilder:
    """
    状態遷移を関数で与えてゲームを組み立てる
    step(s, a1, a2) は (観測名, 遷移先, 確率) のリスト、reward(s, a1, a2) は報酬
    """
    actions1: Sequence[str]
    actions2: Sequence[str]
    observations: Sequence[str]
    gamma: float
    initial: Dict[State, float]
    step: Step
    reward: Callable[[State, int, int], float]
    state_name: Callable[[State], str]
    block_of: Callable[[State], str] = lambda s: "all"
    metadata: Dict[str, Any] = field(default_factory=dict)

    def enumerate_states(self) -> List[State]:
        order: List[State] = []
        seen = set()
        queue = deque()
        for s in self.initial:
            if s not in seen:
                seen.add(s)
                queue.append(s)
        while queue:
            s = queue.popleft()
            order.append(s)
            for a1 in range(len(self.actions1)):
                for a2 in range(len(self.actions2)):
                    for _o, s2, _p in self.step(s, a1, a2):
                        if s2 not in seen:
                            seen.add(s2)
                            queue.append(s2)
        return order

    def build_file(self, partitioned: bool = True) -> GameFile:
        states = self.enumerate_states()
        names = [self.state_name(s) for s in states]
        if len(set(names)) != len(names):
            raise GeneratorError("状態名が一意ではありません")

        transitions: List[TransitionRow] = []
        rewards: List[RewardEntry] = []
        successors: Dict[str, Dict[Tuple[str, str], str]] = {}
        members: Dict[str, List[str]] = {}
        for s, name in zip(states, names):
            block = self.block_of(s)
            members.setdefault(block, []).append(name)
            block_succ = successors.setdefault(block, {})
            for a1, a1_name in enumerate(self.actions1):
                for a2, a2_name in enumerate(self.actions2):
                    merged: Dict[Tuple[str, str], float] = {}
                    for o, s2, p in self.step(s, a1, a2):
                        if p <= 0.0:
                            continue
                        key = (o, self.state_name(s2))
                        merged[key] = merged.get(key, 0.0) + p
                        target = self.block_of(s2)
                        if block_succ.setdefault((a1_name, o), target) != target:
                            raise GeneratorError(
                                "観測だけでは後続ブロックが決まりません",
                                {"block": block, "a1": a1_name, "o": o},
                            )
                    transitions.append(
                        TransitionRow(
                            s=name,
                            a1=a1_name,
                            a2=a2_name,
                            out=[Outcome(o=o, s2=s2, p=p) for (o, s2), p in merged.items()],
                        )
                    )
                    r = float(self.reward(s, a1, a2))
                    if r != 0.0:
                        rewards.append(RewardEntry(s=name, a1=a1_name, a2=a2_name, r=r))

        partitions = None
        if partitioned:
            partitions = [
                PartitionBlock(
                    block=block,
                    states=block_states,
                    successors=[
                        SuccessorEntry(a1=a1, o=o, block=target)
                        for (a1, o), target in successors[block].items()
                    ],
                )
                for block, block_states in members.items()
            ]

        return GameFile(
            states=names,
            actions1=list(self.actions1),
            actions2=list(self.actions2),
            observations=list(self.observations),
            gamma=self.gamma,
            initial_belief={self.state_name(s): p for s, p in self.initial.items()},
            partitions=partitions,
            transitions=transitions,
            rewards=rewards,
            metadata=dict(self.metadata),
        )

    def build(self, partitioned: bool = True) -> Game:
        raw = self.build_file(partitioned)
        game = validate_game(raw)
        logger.info(
            f"{self.metadata.get('family', 'game')} 生成: {game.n_states} states, "
            f"{game.n_transitions} transitions, {len(game.blocks)} blocks"
        )
        return game


def check_gamma(gamma: float) -> None:
    if not 0.0 < gamma < 1.0:
        raise GeneratorError("割引率 γ は (0,1) の範囲である必要があります", {"gamma": gamma})
