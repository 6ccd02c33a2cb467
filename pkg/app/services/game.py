"""
OS-POSG ゲームモデル
ゲーム定義の検証、1ステップの確率測度、信念更新 τ、効用の上下限
"""
import logging
import threading
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy import sparse

from app.config import TOLERANCE_CONFIG
from app.exceptions import (
    GammaOutOfRange,
    InvalidGame,
    InvalidStrategy,
    NegativeProbability,
    PartitionLeak,
    RowSumMismatch,
    UnknownSymbol,
    ZeroProbabilityObservation,
)
from app.models.schemas import GameFile

logger = logging.getLogger(__name__)

PROB_TOL = TOLERANCE_CONFIG["probability"]
SUM_TOL = TOLERANCE_CONFIG["derived_sum"]


def _check_distribution(probs: np.ndarray, what: str) -> np.ndarray:
    probs = np.asarray(probs, dtype=float)
    if probs.ndim != 1 or probs.size == 0:
        raise InvalidStrategy(f"{what} は空でない1次元ベクトルである必要があります")
    if np.any(probs < -PROB_TOL):
        raise InvalidStrategy(f"{what} に負の確率があります", {"min": float(probs.min())})
    if abs(probs.sum() - 1.0) > SUM_TOL:
        raise InvalidStrategy(f"{what} の和が1ではありません", {"sum": float(probs.sum())})
    return np.clip(probs, 0.0, None)


@dataclass(eq=False)
class Belief:
    """ブロック局所の信念 b ∈ Δ(S_k)"""
    block: int
    probs: np.ndarray

    def __post_init__(self):
        self.probs = _check_distribution(self.probs, "belief")

    @classmethod
    def from_weights(cls, block: int, weights: np.ndarray) -> "Belief":
        weights = np.clip(np.asarray(weights, dtype=float), 0.0, None)
        return cls(block, weights / weights.sum())

    def key(self, decimals: int = 12) -> Tuple:
        """キャッシュ用のキー"""
        return (self.block, tuple(np.round(self.probs, decimals)))

    def __repr__(self) -> str:
        return f"Belief(block={self.block}, probs={np.array2string(self.probs, precision=4)})"


@dataclass(eq=False)
class StageStrategy1:
    """プレイヤー1のステージ戦略 π1 ∈ Δ(A1)"""
    probs: np.ndarray

    def __post_init__(self):
        self.probs = _check_distribution(self.probs, "π1")

    @classmethod
    def uniform(cls, n_actions: int) -> "StageStrategy1":
        return cls(np.full(n_actions, 1.0 / n_actions))

    @classmethod
    def pure(cls, n_actions: int, action: int) -> "StageStrategy1":
        probs = np.zeros(n_actions)
        probs[action] = 1.0
        return cls(probs)


@dataclass(eq=False)
class StageStrategy2:
    """
    プレイヤー2のステージ戦略 π2(a2|s)
    cond はブロック局所の状態 × A2 の行列
    """
    cond: np.ndarray

    def __post_init__(self):
        cond = np.asarray(self.cond, dtype=float)
        if cond.ndim != 2:
            raise InvalidStrategy("π2 は状態×行動の行列である必要があります")
        for row in cond:
            _check_distribution(row, "π2(·|s)")
        self.cond = np.clip(cond, 0.0, None)

    @classmethod
    def uniform(cls, n_states: int, n_actions: int) -> "StageStrategy2":
        return cls(np.full((n_states, n_actions), 1.0 / n_actions))

    @classmethod
    def from_joint(cls, joint: np.ndarray, b: np.ndarray) -> "StageStrategy2":
        """π2(s∧a2) から条件付き形式へ。b(s)≈0 の行は一様"""
        joint = np.clip(np.asarray(joint, dtype=float), 0.0, None)
        n_states, n_actions = joint.shape
        cond = np.full((n_states, n_actions), 1.0 / n_actions)
        row_sums = joint.sum(axis=1)
        support = (np.asarray(b) > TOLERANCE_CONFIG["support"]) & (row_sums > 0)
        cond[support] = joint[support] / row_sums[support, None]
        return cls(cond)

    def joint(self, b: np.ndarray) -> np.ndarray:
        """π2(s∧a2) = b(s)·π2(a2|s)"""
        return np.asarray(b)[:, None] * self.cond


@dataclass(frozen=True)
class UtilityBounds:
    """割引和の上下限 L, U と Lipschitz 定数 δ"""
    L: float
    U: float
    delta: float

    @property
    def span(self) -> float:
        return self.U - self.L


@dataclass
class Block:
    """状態分割のブロック"""
    name: str
    states: np.ndarray  # 大域状態インデックス


@dataclass
class StagePair:
    """
    ブロック k における (a1, o) の遷移核
    s_idx / s2_idx はそれぞれ現ブロック・後続ブロックの局所インデックス
    """
    a1: int
    o: int
    successor: int
    s_idx: np.ndarray
    a2_idx: np.ndarray
    s2_idx: np.ndarray
    p: np.ndarray
    kernel: sparse.csr_matrix  # 行 s*|A2|+a2, 列 s'

    def unnormalized_tau(self, b: np.ndarray, cond: np.ndarray, n_successor: int) -> np.ndarray:
        """τ̂(s') = Σ b(s)·π2(a2|s)·T(o,s'|s,a1,a2)（π1 は含まない）"""
        weights = b[self.s_idx] * cond[self.s_idx, self.a2_idx] * self.p
        return np.bincount(self.s2_idx, weights=weights, minlength=n_successor)


@dataclass
class BlockModel:
    """LP 構築用のブロック局所モデル"""
    block: int
    states: np.ndarray
    rewards: np.ndarray  # (n, A1, A2)
    pairs: List[StagePair]
    pair_index: Dict[Tuple[int, int], int]

    @property
    def n_states(self) -> int:
        return len(self.states)


@dataclass(eq=False)
class Game:
    """検証済みの OS-POSG（検証後は不変）"""
    states: Tuple[str, ...]
    actions1: Tuple[str, ...]
    actions2: Tuple[str, ...]
    observations: Tuple[str, ...]
    gamma: float
    rewards: np.ndarray  # (S, A1, A2)
    transitions: Dict[Tuple[int, int, int], Tuple[Tuple[int, int, float], ...]]
    blocks: Tuple[Block, ...]
    successors: Dict[Tuple[int, int, int], int]
    initial_belief: Belief
    metadata: Dict[str, Any] = field(default_factory=dict)
    block_of: np.ndarray = field(init=False)
    local_index: np.ndarray = field(init=False)

    def __post_init__(self):
        self.block_of = np.empty(len(self.states), dtype=int)
        self.local_index = np.empty(len(self.states), dtype=int)
        for k, block in enumerate(self.blocks):
            self.block_of[block.states] = k
            self.local_index[block.states] = np.arange(len(block.states))
        self._block_models: Dict[int, BlockModel] = {}
        self._transition_matrix: Optional[sparse.csr_matrix] = None
        self._lock = threading.Lock()

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_actions1(self) -> int:
        return len(self.actions1)

    @property
    def n_actions2(self) -> int:
        return len(self.actions2)

    @property
    def n_observations(self) -> int:
        return len(self.observations)

    @property
    def n_transitions(self) -> int:
        return sum(len(out) for out in self.transitions.values())

    def block_size(self, block: int) -> int:
        return len(self.blocks[block].states)

    def block_model(self, block: int) -> BlockModel:
        """ブロック局所モデル（遅延構築・キャッシュ）"""
        model = self._block_models.get(block)
        if model is None:
            with self._lock:
                model = self._block_models.get(block)
                if model is None:
                    model = _build_block_model(self, block)
                    self._block_models[block] = model
        return model

    def transition_matrix(self) -> sparse.csr_matrix:
        """観測を周辺化した遷移行列 (S·A1·A2) × S"""
        if self._transition_matrix is None:
            with self._lock:
                if self._transition_matrix is None:
                    self._transition_matrix = _build_transition_matrix(self)
        return self._transition_matrix

    def to_global(self, b: Belief) -> np.ndarray:
        """ブロック局所の信念を大域ベクトルに展開"""
        full = np.zeros(self.n_states)
        full[self.blocks[b.block].states] = b.probs
        return full

    def point_belief(self, state: int) -> Belief:
        block = int(self.block_of[state])
        probs = np.zeros(self.block_size(block))
        probs[self.local_index[state]] = 1.0
        return Belief(block, probs)

    def uniform_belief(self, block: int) -> Belief:
        n = self.block_size(block)
        return Belief(block, np.full(n, 1.0 / n))

    def describe(self) -> Dict[str, Any]:
        """規模の要約"""
        bounds = utility_bounds(self)
        return {
            "states": self.n_states,
            "transitions": self.n_transitions,
            "actions1": self.n_actions1,
            "actions2": self.n_actions2,
            "observations": self.n_observations,
            "blocks": len(self.blocks),
            "gamma": self.gamma,
            "L": bounds.L,
            "U": bounds.U,
            "delta": bounds.delta,
        }


def _index(names: List[str], what: str) -> Dict[str, int]:
    index: Dict[str, int] = {}
    for i, name in enumerate(names):
        if name in index:
            raise InvalidGame(f"{what} が重複しています", {"name": name})
        index[name] = i
    return index


def _lookup(index: Dict[str, int], name: str, what: str) -> int:
    try:
        return index[name]
    except KeyError:
        raise UnknownSymbol(f"未定義の{what}です", {"name": name}) from None


def validate_game(raw: GameFile) -> Game:
    """
    ゲーム定義を検証して Game を返す
    1e-9 未満の確率和のずれは正規化、分割省略時は単一ブロック
    """
    gamma = float(raw.gamma)
    if not 0.0 < gamma < 1.0:
        raise GammaOutOfRange("割引率 γ は (0,1) の範囲である必要があります", {"gamma": gamma})

    s_index = _index(raw.states, "状態")
    a1_index = _index(raw.actions1, "行動(P1)")
    a2_index = _index(raw.actions2, "行動(P2)")
    o_index = _index(raw.observations, "観測")
    if not (s_index and a1_index and a2_index and o_index):
        raise InvalidGame("状態・行動・観測の集合は空にできません")
    n_s, n_a1, n_a2 = len(s_index), len(a1_index), len(a2_index)

    # 遷移
    transitions: Dict[Tuple[int, int, int], Tuple[Tuple[int, int, float], ...]] = {}
    for row in raw.transitions:
        key = (
            _lookup(s_index, row.s, "状態"),
            _lookup(a1_index, row.a1, "行動(P1)"),
            _lookup(a2_index, row.a2, "行動(P2)"),
        )
        if key in transitions:
            raise InvalidGame("遷移行が重複しています", {"s": row.s, "a1": row.a1, "a2": row.a2})
        merged: Dict[Tuple[int, int], float] = {}
        for out in row.out:
            if out.p < 0:
                raise NegativeProbability(
                    "遷移確率が負です", {"s": row.s, "a1": row.a1, "a2": row.a2, "p": out.p}
                )
            okey = (_lookup(o_index, out.o, "観測"), _lookup(s_index, out.s2, "状態"))
            merged[okey] = merged.get(okey, 0.0) + float(out.p)
        total = sum(merged.values())
        if abs(total - 1.0) > PROB_TOL:
            raise RowSumMismatch(
                "遷移確率の和が1ではありません", {"s": row.s, "a1": row.a1, "a2": row.a2, "sum": total}
            )
        transitions[key] = tuple(
            (o, s2, p / total) for (o, s2), p in sorted(merged.items()) if p > 0.0
        )
    if len(transitions) != n_s * n_a1 * n_a2:
        missing = next(
            (raw.states[s], raw.actions1[a1], raw.actions2[a2])
            for s in range(n_s) for a1 in range(n_a1) for a2 in range(n_a2)
            if (s, a1, a2) not in transitions
        )
        raise RowSumMismatch("遷移行が定義されていません（確率和0）", {"key": missing})

    # 報酬
    rewards = np.zeros((n_s, n_a1, n_a2))
    for entry in raw.rewards:
        rewards[
            _lookup(s_index, entry.s, "状態"),
            _lookup(a1_index, entry.a1, "行動(P1)"),
            _lookup(a2_index, entry.a2, "行動(P2)"),
        ] = entry.r
    if not np.all(np.isfinite(rewards)):
        raise InvalidGame("報酬に有限でない値があります")

    # 状態分割
    if raw.partitions is None:
        blocks = (Block("all", np.arange(n_s)),)
        successors = {(0, a1, o): 0 for a1 in range(n_a1) for o in range(len(o_index))}
    else:
        blocks, successors = _build_partition(raw, s_index, a1_index, o_index)

    block_of = np.full(n_s, -1, dtype=int)
    for k, block in enumerate(blocks):
        block_of[block.states] = k

    for (s, a1, _a2), outcomes in transitions.items():
        k = int(block_of[s])
        for o, s2, _p in outcomes:
            succ = successors.get((k, a1, o))
            if succ is None or block_of[s2] != succ:
                raise PartitionLeak(
                    "遷移先が宣言された後続ブロックに含まれません",
                    {
                        "block": blocks[k].name,
                        "a1": raw.actions1[a1],
                        "o": raw.observations[o],
                        "s2": raw.states[s2],
                    },
                )

    # 初期信念
    b0 = np.zeros(n_s)
    for name, p in raw.initial_belief.items():
        if p < 0:
            raise NegativeProbability("初期信念に負の確率があります", {"state": name, "p": p})
        b0[_lookup(s_index, name, "状態")] = p
    if abs(b0.sum() - 1.0) > PROB_TOL:
        raise RowSumMismatch("初期信念の和が1ではありません", {"sum": float(b0.sum())})
    support_blocks = set(block_of[b0 > 0].tolist())
    if len(support_blocks) != 1:
        raise PartitionLeak("初期信念の台が単一ブロックに収まっていません")
    k0 = support_blocks.pop()
    initial = Belief.from_weights(k0, b0[blocks[k0].states])

    game = Game(
        states=tuple(raw.states),
        actions1=tuple(raw.actions1),
        actions2=tuple(raw.actions2),
        observations=tuple(raw.observations),
        gamma=gamma,
        rewards=rewards,
        transitions=transitions,
        blocks=blocks,
        successors=successors,
        initial_belief=initial,
        metadata=dict(raw.metadata),
    )
    logger.info(
        f"ゲーム検証完了: {game.n_states} states, {game.n_transitions} transitions, "
        f"{len(blocks)} blocks"
    )
    return game


def _build_partition(raw: GameFile, s_index, a1_index, o_index):
    blocks: List[Block] = []
    block_index: Dict[str, int] = {}
    seen = np.zeros(len(s_index), dtype=bool)
    for part in raw.partitions:
        if part.block in block_index:
            raise InvalidGame("ブロックIDが重複しています", {"block": part.block})
        members = np.array([_lookup(s_index, s, "状態") for s in part.states], dtype=int)
        if members.size == 0:
            raise InvalidGame("空のブロックがあります", {"block": part.block})
        if np.any(seen[members]) or len(set(members.tolist())) != members.size:
            raise InvalidGame("ブロックが互いに素ではありません", {"block": part.block})
        seen[members] = True
        block_index[part.block] = len(blocks)
        blocks.append(Block(part.block, members))
    if not seen.all():
        raise InvalidGame("ブロックが全状態を被覆していません")

    successors: Dict[Tuple[int, int, int], int] = {}
    for part in raw.partitions:
        k = block_index[part.block]
        for entry in part.successors:
            key = (k, _lookup(a1_index, entry.a1, "行動(P1)"), _lookup(o_index, entry.o, "観測"))
            target = _lookup(block_index, entry.block, "ブロック")
            if successors.get(key, target) != target:
                raise InvalidGame("後続ブロックの定義が矛盾しています", {"block": part.block})
            successors[key] = target
    return tuple(blocks), successors


def _build_block_model(game: Game, block: int) -> BlockModel:
    states = game.blocks[block].states
    n_a2 = game.n_actions2
    entries: Dict[Tuple[int, int], List[Tuple[int, int, int, float]]] = {}
    for i, s in enumerate(states):
        for a1 in range(game.n_actions1):
            for a2 in range(n_a2):
                for o, s2, p in game.transitions[(int(s), a1, a2)]:
                    entries.setdefault((a1, o), []).append((i, a2, int(game.local_index[s2]), p))

    pairs: List[StagePair] = []
    for a1, o in sorted(entries):
        rows = np.array(entries[(a1, o)])
        successor = game.successors[(block, a1, o)]
        s_idx = rows[:, 0].astype(int)
        a2_idx = rows[:, 1].astype(int)
        s2_idx = rows[:, 2].astype(int)
        p = rows[:, 3].astype(float)
        kernel = sparse.csr_matrix(
            (p, (s_idx * n_a2 + a2_idx, s2_idx)),
            shape=(len(states) * n_a2, game.block_size(successor)),
        )
        pairs.append(StagePair(a1, o, successor, s_idx, a2_idx, s2_idx, p, kernel))

    return BlockModel(
        block=block,
        states=states,
        rewards=game.rewards[states],
        pairs=pairs,
        pair_index={(pair.a1, pair.o): i for i, pair in enumerate(pairs)},
    )


def _build_transition_matrix(game: Game) -> sparse.csr_matrix:
    rows, cols, vals = [], [], []
    n_a1, n_a2 = game.n_actions1, game.n_actions2
    for (s, a1, a2), outcomes in game.transitions.items():
        row = (s * n_a1 + a1) * n_a2 + a2
        for _o, s2, p in outcomes:
            rows.append(row)
            cols.append(s2)
            vals.append(p)
    return sparse.csr_matrix(
        (vals, (rows, cols)), shape=(game.n_states * n_a1 * n_a2, game.n_states)
    )


def _check_stage_inputs(game: Game, b: Belief, p1: StageStrategy1, p2: StageStrategy2):
    n = game.block_size(b.block)
    if p1.probs.shape != (game.n_actions1,):
        raise InvalidStrategy("π1 の次元が |A1| と一致しません")
    if p2.cond.shape != (n, game.n_actions2):
        raise InvalidStrategy(
            "π2 の形状がブロックの状態数×|A2| と一致しません",
            {"expected": (n, game.n_actions2), "got": p2.cond.shape},
        )


def stage_distribution(
    game: Game, b: Belief, p1: StageStrategy1, p2: StageStrategy2
) -> Dict[Tuple[int, int, int, int, int], float]:
    """Pr[s, a1, a2, o, s'] = b(s)·π1(a1)·π2(a2|s)·T(o,s'|s,a1,a2)（大域インデックス）"""
    _check_stage_inputs(game, b, p1, p2)
    states = game.blocks[b.block].states
    dist: Dict[Tuple[int, int, int, int, int], float] = {}
    for i in np.flatnonzero(b.probs > 0):
        s = int(states[i])
        for a1 in np.flatnonzero(p1.probs > 0):
            for a2 in np.flatnonzero(p2.cond[i] > 0):
                w = b.probs[i] * p1.probs[a1] * p2.cond[i, a2]
                for o, s2, p in game.transitions[(s, int(a1), int(a2))]:
                    key = (s, int(a1), int(a2), o, s2)
                    dist[key] = dist.get(key, 0.0) + w * p
    return dist


def prob_action_obs(
    game: Game, b: Belief, p1: StageStrategy1, p2: StageStrategy2, a1: int, o: int
) -> float:
    """Pr_{b,π1,π2}[a1, o]"""
    _check_stage_inputs(game, b, p1, p2)
    model = game.block_model(b.block)
    idx = model.pair_index.get((a1, o))
    if idx is None or p1.probs[a1] == 0.0:
        return 0.0
    pair = model.pairs[idx]
    tau = pair.unnormalized_tau(b.probs, p2.cond, game.block_size(pair.successor))
    return float(p1.probs[a1] * tau.sum())


def belief_update(game: Game, b: Belief, a1: int, p2: StageStrategy2, o: int) -> Belief:
    """τ(b, a1, π2, o)：後続ブロック上の正規化された信念"""
    n = game.block_size(b.block)
    if p2.cond.shape != (n, game.n_actions2):
        raise InvalidStrategy("π2 の形状がブロックと一致しません")
    model = game.block_model(b.block)
    idx = model.pair_index.get((a1, o))
    if idx is None:
        raise ZeroProbabilityObservation(
            "この (a1, o) はブロックから到達不能です",
            {"block": game.blocks[b.block].name, "a1": game.actions1[a1], "o": game.observations[o]},
        )
    pair = model.pairs[idx]
    tau = pair.unnormalized_tau(b.probs, p2.cond, game.block_size(pair.successor))
    total = tau.sum()
    if total <= 0.0:
        raise ZeroProbabilityObservation(
            "観測確率が0です",
            {"block": game.blocks[b.block].name, "a1": game.actions1[a1], "o": game.observations[o]},
        )
    return Belief(pair.successor, tau / total)


def utility_bounds(game: Game) -> UtilityBounds:
    """L = min R/(1-γ), U = max R/(1-γ), δ = (U-L)/2"""
    L = float(game.rewards.min()) / (1.0 - game.gamma)
    U = float(game.rewards.max()) / (1.0 - game.gamma)
    return UtilityBounds(L=L, U=U, delta=(U - L) / 2.0)
