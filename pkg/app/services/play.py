"""
戦略抽出と自己対戦シミュレーション
- プレイヤー1: ガジェット ρ を保持する継続的再解法
- プレイヤー2: 上界ステージゲームの均衡戦略を再生し、プレイヤー1の信念を追跡
"""
import json
import logging
import threading
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from app.config import PLAY_CONFIG
from app.exceptions import ConfigError, InvalidStrategy, ZeroProbabilityObservation
from app.services.bounds import AlphaVector, LowerBound, UpperBound
from app.services.game import (
    Belief,
    Game,
    StageStrategy1,
    StageStrategy2,
    belief_update,
    utility_bounds,
)
from app.services.stage_solver import PairKey, resolve_gadget, solve_stage_lb, solve_stage_ub

logger = logging.getLogger(__name__)

PLAY_MODES = ("selfplay", "p1-vs-uniform", "uniform-vs-p2")


class StageCache:
    """ステージゲーム解のキャッシュ（スレッド間で共有）"""

    def __init__(self, max_size: Optional[int] = None):
        self._cache: Dict[Tuple, Any] = {}
        self._max_cache_size = max_size or PLAY_CONFIG["max_cache_size"]
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def get_or_compute(self, key: Tuple, compute: Callable[[], Any]) -> Any:
        with self._lock:
            if key in self._cache:
                self.hits += 1
                return self._cache[key]
        value = compute()
        with self._lock:
            self.misses += 1
            if len(self._cache) >= self._max_cache_size:
                # 最も古いエントリを削除
                oldest_key = next(iter(self._cache))
                del self._cache[oldest_key]
            self._cache[key] = value
        return value

    def __len__(self) -> int:
        return len(self._cache)


def _sample(rng: np.random.Generator, probs: np.ndarray) -> int:
    probs = np.where(probs < 1e-9, 0.0, probs)
    return int(rng.choice(len(probs), p=probs / probs.sum()))


def _successor_block(game: Game, block: int, a1: int, o: int) -> int:
    succ = game.successors.get((block, a1, o))
    if succ is None:
        raise ZeroProbabilityObservation(
            "後続ブロックが定義されていない (a1, o) です",
            {"block": game.blocks[block].name, "a1": game.actions1[a1], "o": game.observations[o]},
        )
    return succ


def fallback_belief(game: Game, b: Belief, a1: int, o: int) -> Belief:
    """
    想定した π2 の下で確率0の観測を受けたときの信念
    一様 π2 での τ → 一様な b からの τ → 後続ブロック上の一様分布 の順に試す
    """
    uniform_p2 = StageStrategy2.uniform(len(b.probs), game.n_actions2)
    for start in (b, game.uniform_belief(b.block)):
        try:
            return belief_update(game, start, a1, uniform_p2, o)
        except ZeroProbabilityObservation:
            continue
    return game.uniform_belief(_successor_block(game, b.block, a1, o))


# --- プレイヤー1: 継続的再解法 ---

@dataclass
class P1Plan:
    """現在の信念・ガジェットでの再解法の結果"""
    pi1: StageStrategy1
    continuation: Dict[PairKey, AlphaVector]
    assumed_pi2: StageStrategy2


@dataclass
class P1Session:
    game: Game
    lb: LowerBound
    belief: Belief
    gadget: AlphaVector
    plan: Optional[P1Plan] = None
    resets: int = 0


def p1_start(game: Game, lb: LowerBound, b_init: Optional[Belief] = None) -> P1Session:
    """ρ_init = argmax_{α∈Γ} α(b_init)"""
    b = b_init or game.initial_belief
    return P1Session(game=game, lb=lb, belief=b, gadget=lb.best_alpha(b))


def _plan_key(session: P1Session) -> Tuple:
    return ("p1", session.belief.key(), tuple(np.round(session.gadget.values, 12)))


def p1_plan(session: P1Session, cache: Optional[StageCache] = None) -> P1Plan:
    """ガジェット制約付きで再解法し、敵の想定戦略は下界ステージゲームの π2 とする"""
    if session.plan is not None:
        return session.plan

    def compute() -> P1Plan:
        pi1, continuation = resolve_gadget(session.game, session.belief, session.gadget, session.lb)
        assumed = solve_stage_lb(session.game, session.belief, session.lb).pi2
        return P1Plan(pi1, continuation, assumed)

    session.plan = cache.get_or_compute(_plan_key(session), compute) if cache else compute()
    return session.plan


def p1_step(session: P1Session, rng: np.random.Generator, cache: Optional[StageCache] = None) -> int:
    """π1* から行動を標本化する"""
    return _sample(rng, p1_plan(session, cache).pi1.probs)


def p1_observe(session: P1Session, a1: int, o: int) -> P1Session:
    """b ← τ(b, a1, π2, o)、ρ ← ᾱ*(a1, o)"""
    plan = p1_plan(session)
    game = session.game
    try:
        belief = belief_update(game, session.belief, a1, plan.assumed_pi2, o)
        gadget = plan.continuation[(a1, o)]
    except (ZeroProbabilityObservation, KeyError):
        belief = fallback_belief(game, session.belief, a1, o)
        gadget = session.lb.best_alpha(belief)
        session.resets += 1
        logger.debug(f"P1: 想定外の観測のためガジェットを再設定 (block={belief.block})")
    session.belief, session.gadget, session.plan = belief, gadget, None
    return session


# --- プレイヤー2: ステージゲームの再生 ---

@dataclass
class P2Session:
    game: Game
    ub: UpperBound
    belief: Belief
    strategy: Optional[StageStrategy2] = None
    resets: int = 0


def p2_start(game: Game, ub: UpperBound, b_init: Optional[Belief] = None) -> P2Session:
    return P2Session(game=game, ub=ub, belief=b_init or game.initial_belief)


def p2_strategy(session: P2Session, cache: Optional[StageCache] = None) -> StageStrategy2:
    """π2* = [H ov](b) の均衡戦略"""
    if session.strategy is None:
        def compute() -> StageStrategy2:
            return solve_stage_ub(session.game, session.belief, session.ub).pi2

        key = ("p2", session.belief.key())
        session.strategy = cache.get_or_compute(key, compute) if cache else compute()
    return session.strategy


def p2_step(
    session: P2Session, state: int, rng: np.random.Generator, cache: Optional[StageCache] = None
) -> int:
    """現在状態 s で π2*(·|s) から行動を標本化する"""
    game = session.game
    if game.block_of[state] != session.belief.block:
        raise InvalidStrategy(
            "状態がプレイヤー2の追跡しているブロックにありません",
            {"state": game.states[state], "block": game.blocks[session.belief.block].name},
        )
    cond = p2_strategy(session, cache).cond
    return _sample(rng, cond[game.local_index[state]])


def p2_observe(session: P2Session, a1: int, o: int) -> P2Session:
    """b ← τ(b, a1, π2*, o)"""
    game = session.game
    strategy = p2_strategy(session)
    try:
        session.belief = belief_update(game, session.belief, a1, strategy, o)
    except ZeroProbabilityObservation:
        session.belief = fallback_belief(game, session.belief, a1, o)
        session.resets += 1
    session.strategy = None
    return session


# --- 方策インターフェース ---

class Player1Policy(ABC):
    """プレイヤー1の方策（行動・観測の履歴のみに依存）"""

    def __init__(self, game: Game):
        self.game = game

    @abstractmethod
    def reset(self) -> None:
        ...

    @abstractmethod
    def strategy(self) -> StageStrategy1:
        ...

    @abstractmethod
    def observe(self, a1: int, o: int) -> None:
        ...

    @abstractmethod
    def clone(self) -> "Player1Policy":
        ...

    def act(self, rng: np.random.Generator) -> int:
        return _sample(rng, self.strategy().probs)


class Player2Policy(ABC):
    """プレイヤー2の方策（状態とプレイヤー1の公開履歴に依存）"""

    def __init__(self, game: Game):
        self.game = game

    @abstractmethod
    def reset(self) -> None:
        ...

    @property
    @abstractmethod
    def block(self) -> int:
        ...

    @abstractmethod
    def strategy(self) -> StageStrategy2:
        ...

    @abstractmethod
    def observe(self, a1: int, o: int) -> None:
        ...

    @abstractmethod
    def clone(self) -> "Player2Policy":
        ...

    def act(self, state: int, rng: np.random.Generator) -> int:
        if self.game.block_of[state] != self.block:
            raise InvalidStrategy("状態が方策のブロックにありません", {"state": self.game.states[state]})
        return _sample(rng, self.strategy().cond[self.game.local_index[state]])


class ResolvingPlayer1(Player1Policy):
    """下界 Γ からの継続的再解法"""

    def __init__(self, game: Game, lb: LowerBound, cache: Optional[StageCache] = None):
        super().__init__(game)
        self.lb = lb
        self.cache = cache if cache is not None else StageCache()
        self.session = p1_start(game, lb)

    def reset(self) -> None:
        self.session = p1_start(self.game, self.lb)

    def strategy(self) -> StageStrategy1:
        return p1_plan(self.session, self.cache).pi1

    def observe(self, a1: int, o: int) -> None:
        p1_plan(self.session, self.cache)
        p1_observe(self.session, a1, o)

    def clone(self) -> "ResolvingPlayer1":
        other = ResolvingPlayer1.__new__(ResolvingPlayer1)
        Player1Policy.__init__(other, self.game)
        other.lb, other.cache = self.lb, self.cache
        s = self.session
        other.session = P1Session(s.game, s.lb, s.belief, s.gadget, s.plan, s.resets)
        return other


class StageGamePlayer2(Player2Policy):
    """上界 Υ のステージゲーム均衡を再生する"""

    def __init__(self, game: Game, ub: UpperBound, cache: Optional[StageCache] = None):
        super().__init__(game)
        self.ub = ub
        self.cache = cache if cache is not None else StageCache()
        self.session = p2_start(game, ub)

    @property
    def block(self) -> int:
        return self.session.belief.block

    @property
    def belief(self) -> Belief:
        return self.session.belief

    def reset(self) -> None:
        self.session = p2_start(self.game, self.ub)

    def strategy(self) -> StageStrategy2:
        return p2_strategy(self.session, self.cache)

    def observe(self, a1: int, o: int) -> None:
        p2_strategy(self.session, self.cache)
        p2_observe(self.session, a1, o)

    def clone(self) -> "StageGamePlayer2":
        other = StageGamePlayer2.__new__(StageGamePlayer2)
        Player2Policy.__init__(other, self.game)
        other.ub, other.cache = self.ub, self.cache
        s = self.session
        other.session = P2Session(s.game, s.ub, s.belief, s.strategy, s.resets)
        return other


class UniformPlayer1(Player1Policy):
    def reset(self) -> None:
        pass

    def strategy(self) -> StageStrategy1:
        return StageStrategy1.uniform(self.game.n_actions1)

    def observe(self, a1: int, o: int) -> None:
        pass

    def clone(self) -> "UniformPlayer1":
        return UniformPlayer1(self.game)


class UniformPlayer2(Player2Policy):
    """一様ランダム（ブロックのみ追跡）"""

    def __init__(self, game: Game):
        super().__init__(game)
        self._block = game.initial_belief.block

    @property
    def block(self) -> int:
        return self._block

    def reset(self) -> None:
        self._block = self.game.initial_belief.block

    def strategy(self) -> StageStrategy2:
        return StageStrategy2.uniform(self.game.block_size(self._block), self.game.n_actions2)

    def observe(self, a1: int, o: int) -> None:
        self._block = _successor_block(self.game, self._block, a1, o)

    def clone(self) -> "UniformPlayer2":
        other = UniformPlayer2(self.game)
        other._block = self._block
        return other


# --- シミュレーション ---

@dataclass
class EpisodeResult:
    """1エピソードの打ち切り割引利得"""
    payoff: float
    horizon: int
    trajectory: List[Tuple[int, int, int, int, float]] = field(default_factory=list)  # (s, a1, a2, o, r)


@dataclass
class PayoffStats:
    episodes: int
    horizon: int
    mean: float
    standard_error: float
    min: float
    max: float
    truncation: float
    results: List[EpisodeResult] = field(default_factory=list, repr=False)

    @classmethod
    def from_results(cls, results: List[EpisodeResult], horizon: int, truncation: float) -> "PayoffStats":
        payoffs = np.array([r.payoff for r in results])
        se = float(payoffs.std(ddof=1) / np.sqrt(len(payoffs))) if len(payoffs) > 1 else 0.0
        return cls(
            episodes=len(results),
            horizon=horizon,
            mean=float(payoffs.mean()),
            standard_error=se,
            min=float(payoffs.min()),
            max=float(payoffs.max()),
            truncation=truncation,
            results=results,
        )


def truncation_tolerance(game: Game, horizon: int) -> float:
    """τ_c = γ^T · max(U − L, |L|, |U|)"""
    bounds = utility_bounds(game)
    return game.gamma ** horizon * max(bounds.span, abs(bounds.L), abs(bounds.U))


def default_horizon(game: Game, tolerance: Optional[float] = None, cap: int = 10_000) -> int:
    """τ_c ≤ tolerance となる最小の T"""
    tolerance = PLAY_CONFIG["truncation_tolerance"] if tolerance is None else tolerance
    for horizon in range(cap):
        if truncation_tolerance(game, horizon) <= tolerance:
            return horizon
    return cap


def run_episode(
    game: Game,
    p1: Player1Policy,
    p2: Player2Policy,
    horizon: int,
    rng: np.random.Generator,
    record: bool = False,
) -> EpisodeResult:
    p1.reset()
    p2.reset()
    b0 = game.initial_belief
    state = int(game.blocks[b0.block].states[_sample(rng, b0.probs)])
    payoff, discount = 0.0, 1.0
    trajectory: List[Tuple[int, int, int, int, float]] = []
    for _ in range(horizon):
        a1 = p1.act(rng)
        a2 = p2.act(state, rng)
        reward = float(game.rewards[state, a1, a2])
        payoff += discount * reward
        discount *= game.gamma
        outcomes = game.transitions[(state, a1, a2)]
        o, s2, _ = outcomes[_sample(rng, np.array([p for _, _, p in outcomes]))]
        if record:
            trajectory.append((state, a1, a2, o, reward))
        p1.observe(a1, o)
        p2.observe(a1, o)
        state = s2
    return EpisodeResult(payoff=payoff, horizon=horizon, trajectory=trajectory)


def simulate(
    game: Game,
    p1_policy: Player1Policy,
    p2_policy: Player2Policy,
    horizon: Optional[int] = None,
    episodes: Optional[int] = None,
    seed: int = 0,
    workers: Optional[int] = None,
    record: bool = False,
) -> PayoffStats:
    """
    M エピソードを T ステップずつ実行し、打ち切り割引利得の統計を返す
    エピソードごとに独立した乱数列を使うので、workers 数によらず結果は同じ
    """
    horizon = default_horizon(game) if horizon is None else horizon
    episodes = PLAY_CONFIG["episodes"] if episodes is None else episodes
    workers = PLAY_CONFIG["workers"] if workers is None else workers
    streams = np.random.SeedSequence(seed).spawn(episodes)

    def run(i: int) -> EpisodeResult:
        rng = np.random.default_rng(streams[i])
        return run_episode(game, p1_policy.clone(), p2_policy.clone(), horizon, rng, record)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, range(episodes)))
    else:
        results = [run(i) for i in range(episodes)]

    stats = PayoffStats.from_results(results, horizon, truncation_tolerance(game, horizon))
    logger.info(
        f"シミュレーション: {episodes} エピソード, T={horizon}, "
        f"平均 {stats.mean:.4f} ± {stats.standard_error:.4f}"
    )
    return stats


def sandwich_interval(
    stats: PayoffStats,
    lower: float,
    upper: float,
    mode: str = "selfplay",
    se_multiplier: Optional[float] = None,
) -> Tuple[float, float]:
    """
    平均が入るべき区間 [uv − τ_c − kSE, ov + τ_c + kSE]
    p1-vs-uniform は下側のみ、uniform-vs-p2 は上側のみを保証する
    """
    k = PLAY_CONFIG["se_multiplier"] if se_multiplier is None else se_multiplier
    slack = stats.truncation + k * stats.standard_error
    low = lower - slack if mode in ("selfplay", "p1-vs-uniform") else float("-inf")
    high = upper + slack if mode in ("selfplay", "uniform-vs-p2") else float("inf")
    return low, high


def sandwich_verdict(stats: PayoffStats, lower: float, upper: float, mode: str = "selfplay") -> str:
    low, high = sandwich_interval(stats, lower, upper, mode)
    return "pass" if low <= stats.mean <= high else "fail"


def export_trajectories(game: Game, results: List[EpisodeResult], path: str) -> int:
    """1ステップ1行の JSON で軌跡を書き出す。戻り値は行数"""
    lines = 0
    with open(path, "w", encoding="utf-8") as f:
        for episode, result in enumerate(results):
            for t, (s, a1, a2, o, r) in enumerate(result.trajectory):
                record = {
                    "episode": episode,
                    "t": t,
                    "s": game.states[s],
                    "a1": game.actions1[a1],
                    "a2": game.actions2[a2],
                    "o": game.observations[o],
                    "r": r,
                }
                f.write(json.dumps(record, ensure_ascii=False) + "\n")
                lines += 1
    return lines


def build_policies(
    game: Game, lb: LowerBound, ub: UpperBound, mode: str, cache: Optional[StageCache] = None
) -> Tuple[Player1Policy, Player2Policy]:
    """モード名から方策の組を作る"""
    cache = cache if cache is not None else StageCache()
    if mode == "selfplay":
        return ResolvingPlayer1(game, lb, cache), StageGamePlayer2(game, ub, cache)
    if mode == "p1-vs-uniform":
        return ResolvingPlayer1(game, lb, cache), UniformPlayer2(game)
    if mode == "uniform-vs-p2":
        return UniformPlayer1(game), StageGamePlayer2(game, ub, cache)
    raise ConfigError("不明なモードです", {"mode": mode, "choices": list(PLAY_MODES)})
