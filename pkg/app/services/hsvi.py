"""
HSVI ソルバー
ρ スケジュールに従う試行ベースの探索と、両境界の点ベース更新
"""
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from app.config import LOGGING_CONFIG, SolverConfig
from app.services.bounds import LowerBound, UpperBound
from app.services.game import Belief, Game, StageStrategy1, StageStrategy2, utility_bounds
from app.services.init_bounds import initial_bounds
from app.services.stage_solver import StageSolutionLB, StageSolutionUB, solve_stage_lb, solve_stage_ub

logger = logging.getLogger(__name__)
progress_logger = logging.getLogger(LOGGING_CONFIG["progress_logger"])

REACH_TOL = 1e-12


@dataclass(frozen=True)
class RhoSchedule:
    """ρ(0) = ε、ρ(t+1) = (ρ(t) − 2δD)/γ"""
    epsilon: float
    gamma: float
    delta: float
    neighborhood: float

    def __call__(self, t: int) -> float:
        value = self.epsilon
        step = 2.0 * self.delta * self.neighborhood
        for _ in range(t):
            value = (value - step) / self.gamma
        return value

    def t_max(self, span: float, cap: int = 10_000) -> int:
        """ρ(t) ≥ U − L となる最小の t"""
        value, step = self.epsilon, 2.0 * self.delta * self.neighborhood
        for t in range(cap):
            if value >= span:
                return t
            value = (value - step) / self.gamma
        return cap


def rho(t: int, schedule: RhoSchedule) -> float:
    return schedule(t)


def excess(t: int, b: Belief, lb: LowerBound, ub: UpperBound, schedule: RhoSchedule) -> float:
    """ov(b) − uv(b) − ρ(t)"""
    return ub.value(b) - lb.value(b) - schedule(t)


@dataclass
class Exploration:
    """次に探索する (a1, o) とその後続信念"""
    a1: int
    o: int
    belief: Belief
    weighted_excess: float
    probability: float


def select_exploration(
    game: Game,
    b: Belief,
    pi1_ub: StageStrategy1,
    pi2_lb: StageStrategy2,
    lb: LowerBound,
    ub: UpperBound,
    t: int,
    schedule: RhoSchedule,
) -> Optional[Exploration]:
    """
    Pr[a1, o]·excess_{t+1}(τ(b, a1, π2, o)) が最大の (a1, o) を選ぶ
    最大値が 0 以下なら None。同値は (a1, o) の小さい方
    """
    model = game.block_model(b.block)
    best: Optional[Exploration] = None
    for pair in model.pairs:
        weight = pi1_ub.probs[pair.a1]
        if weight <= 0.0:
            continue
        tau = pair.unnormalized_tau(b.probs, pi2_lb.cond, game.block_size(pair.successor))
        total = float(tau.sum())
        probability = weight * total
        if probability <= REACH_TOL:
            continue
        successor = Belief(pair.successor, tau / total)
        weighted = probability * excess(t + 1, successor, lb, ub, schedule)
        if best is None or weighted > best.weighted_excess:
            best = Exploration(pair.a1, pair.o, successor, weighted, probability)
    if best is None or best.weighted_excess <= 0.0:
        return None
    return best


@dataclass
class SolveStats:
    """solve の統計"""
    epsilon: float
    neighborhood: float
    trials: int = 0
    updates: int = 0
    final_gap: float = float("inf")
    lower_value: float = float("-inf")
    upper_value: float = float("inf")
    budget_exceeded: bool = False
    depths: List[int] = field(default_factory=list)
    gaps: List[float] = field(default_factory=list)
    gamma_sizes: List[int] = field(default_factory=list)
    upsilon_sizes: List[int] = field(default_factory=list)
    timing: Dict[str, float] = field(
        default_factory=lambda: {"init_lb": 0.0, "init_ub": 0.0, "lb_lp": 0.0, "ub_lp": 0.0, "prune": 0.0, "total": 0.0}
    )

    def to_dict(self) -> Dict:
        return asdict(self)


def point_update(
    game: Game, b: Belief, lb: LowerBound, ub: UpperBound
) -> Tuple[LowerBound, UpperBound]:
    """b で両ステージゲームを解き、Γ に valcomp の証明書、Υ に (b, [H ov](b)) を加える"""
    lb_solution = solve_stage_lb(game, b, lb)
    ub_solution = solve_stage_ub(game, b, ub)
    lb.insert(lb_solution.composed_alpha)
    ub.insert(b, ub_solution.value)
    return lb, ub


class _BudgetExceeded(Exception):
    pass


class HSVISolver:
    """HSVI の試行ループ"""

    def __init__(self, game: Game, config: Optional[SolverConfig] = None):
        self.game = game
        self.config = config or SolverConfig()
        self.bounds = utility_bounds(game)
        self.neighborhood = self.config.resolve_neighborhood(game.gamma, self.bounds.delta)
        self.lb: Optional[LowerBound] = None
        self.ub: Optional[UpperBound] = None
        self.stats = SolveStats(epsilon=self.config.epsilon, neighborhood=self.neighborhood)
        self._started = 0.0

    # --- 初期化 ---

    def initialize(self) -> None:
        lb, ub, lower, upper = initial_bounds(
            self.game, self.config.init_beta, self.config.init_time_limit, self.config.prune_growth
        )
        self.lb, self.ub = lb, ub
        self.stats.timing["init_lb"] = lower.seconds
        self.stats.timing["init_ub"] = upper.seconds

    # --- 更新 ---

    def _check_budget(self) -> None:
        limit = self.config.wall_clock_limit
        if limit is not None and time.perf_counter() - self._started > limit:
            raise _BudgetExceeded()

    def _solve_stages(self, b: Belief) -> Tuple[StageSolutionLB, StageSolutionUB]:
        self._check_budget()
        started = time.perf_counter()
        lb_solution = solve_stage_lb(self.game, b, self.lb)
        mid = time.perf_counter()
        ub_solution = solve_stage_ub(self.game, b, self.ub)
        self.stats.timing["lb_lp"] += mid - started
        self.stats.timing["ub_lp"] += time.perf_counter() - mid
        return lb_solution, ub_solution

    def _insert(self, b: Belief, lb_solution: StageSolutionLB, ub_solution: StageSolutionUB) -> None:
        self.lb.insert(lb_solution.composed_alpha)
        self.ub.insert(b, ub_solution.value)
        self.stats.updates += 1

    def _update(self, b: Belief) -> Tuple[StageSolutionLB, StageSolutionUB]:
        lb_solution, ub_solution = self._solve_stages(b)
        self._insert(b, lb_solution, ub_solution)
        return lb_solution, ub_solution

    def _explore(self, schedule: RhoSchedule, depth_limit: int) -> int:
        """1試行: 下りながら更新・選択し、戻りで再更新する。到達深さを返す"""
        path: List[Belief] = []
        b, t = self.game.initial_belief, 0
        try:
            while True:
                lb_solution, ub_solution = self._solve_stages(b)
                choice = None
                if t < depth_limit:
                    # 後続は b に挿入する前の境界で選ぶ
                    choice = select_exploration(
                        self.game, b, ub_solution.pi1, lb_solution.pi2, self.lb, self.ub, t, schedule
                    )
                self._insert(b, lb_solution, ub_solution)
                path.append(b)
                if choice is None:
                    break
                b, t = choice.belief, t + 1
            for visited in reversed(path):
                self._update(visited)
        finally:
            self.stats.depths.append(len(path) - 1)
        return len(path) - 1

    def gap(self) -> Tuple[float, float, float]:
        b0 = self.game.initial_belief
        lower, upper = self.lb.value(b0), self.ub.value(b0)
        return lower, upper, upper - lower

    def _trial_epsilon(self, gap: float) -> float:
        """ε_imm = max(ε, f + η(gap − f))、f = min(epsilon_floor, ε)"""
        eps = self.config.epsilon
        floor = min(self.config.epsilon_floor, eps)
        return max(eps, floor + self.config.eta * (gap - floor))

    def _log_progress(self, depth: int, lower: float, upper: float) -> None:
        record = {
            "trial": self.stats.trials,
            "depth": depth,
            "gap": upper - lower,
            "lower": lower,
            "upper": upper,
            "gamma_size": self.lb.size(),
            "upsilon_size": self.ub.size(),
            "elapsed": round(time.perf_counter() - self._started, 6),
        }
        progress_logger.info(json.dumps(record))

    def solve(self) -> Tuple[LowerBound, UpperBound, SolveStats]:
        self._started = time.perf_counter()
        if self.lb is None or self.ub is None:
            self.initialize()
        eps = self.config.epsilon
        depth_limit = min(
            self.config.max_trial_depth,
            RhoSchedule(eps, self.game.gamma, self.bounds.delta, self.neighborhood).t_max(self.bounds.span),
        )
        lower, upper, gap = self.gap()
        logger.info(f"HSVI 開始: uv={lower:.4f}, ov={upper:.4f}, ε={eps}, D={self.neighborhood:.4g}")

        try:
            while gap > eps:
                self._check_budget()
                schedule = RhoSchedule(
                    self._trial_epsilon(gap), self.game.gamma, self.bounds.delta, self.neighborhood
                )
                depth = self._explore(schedule, depth_limit)
                self.stats.trials += 1
                lower, upper, gap = self.gap()
                self.stats.gaps.append(gap)
                self.stats.gamma_sizes.append(self.lb.size())
                self.stats.upsilon_sizes.append(self.ub.size())
                self._log_progress(depth, lower, upper)
        except _BudgetExceeded:
            self.stats.budget_exceeded = True
            lower, upper, gap = self.gap()
            logger.warning(f"時間上限に達しました: gap={gap:.4f} > ε={eps}")

        self.stats.lower_value, self.stats.upper_value, self.stats.final_gap = lower, upper, gap
        self.stats.timing["prune"] = self.ub.prune_seconds
        self.stats.timing["total"] = time.perf_counter() - self._started
        logger.info(
            f"HSVI 終了: {self.stats.trials} 試行, {self.stats.updates} 更新, gap={gap:.4f}, "
            f"|Γ|={self.lb.size()}, |Υ|={self.ub.size()}"
        )
        return self.lb, self.ub, self.stats


def solve(game: Game, config: Optional[SolverConfig] = None) -> Tuple[LowerBound, UpperBound, SolveStats]:
    return HSVISolver(game, config).solve()


def sample_beliefs(game: Game, block: int, count: int, rng: np.random.Generator) -> List[Belief]:
    """Dirichlet(1) で信念を標本化する"""
    n = game.block_size(block)
    return [Belief(block, p) for p in rng.dirichlet(np.ones(n), size=count)]
