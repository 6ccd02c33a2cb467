"""
価値関数の上下界
下界 uv: α ベクトル集合 Γ の点ごとの最大
上界 ov: 点集合 Υ の凸包補間の δ-Lipschitz 下包絡（射影 LP）
"""
import logging
import math
import time
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Tuple

import numpy as np

from app.config import TOLERANCE_CONFIG
from app.exceptions import CrossBlockEvaluation, EmptyBound, RangeViolation
from app.services.game import Belief, UtilityBounds
from app.services.lp import GE, LpModel, solve_lp

logger = logging.getLogger(__name__)

RANGE_TOL = TOLERANCE_CONFIG["bound_range"]


@dataclass(eq=False)
class AlphaVector:
    """ブロック局所の α ベクトル"""
    block: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)

    def evaluate(self, b: Belief) -> float:
        if b.block != self.block or b.probs.shape != self.values.shape:
            raise CrossBlockEvaluation(
                "α ベクトルと信念のブロックが一致しません", {"alpha": self.block, "belief": b.block}
            )
        return float(self.values @ b.probs)


def _clamp_to_range(values: np.ndarray, utility: UtilityBounds, what: str) -> np.ndarray:
    if np.any(values < utility.L - RANGE_TOL) or np.any(values > utility.U + RANGE_TOL):
        raise RangeViolation(
            f"{what} が [L, U] の範囲外です",
            {"min": float(np.min(values)), "max": float(np.max(values)), "L": utility.L, "U": utility.U},
        )
    return np.clip(values, utility.L, utility.U)


class LowerBound:
    """下界 uv(b) = max_{α∈Γ} α·b（ブロックごとに Γ を保持）"""

    def __init__(self, utility: UtilityBounds):
        self.utility = utility
        self._alphas: Dict[int, np.ndarray] = {}
        self._initial: Dict[int, np.ndarray] = {}

    @classmethod
    def from_initial(cls, utility: UtilityBounds, initial: Dict[int, AlphaVector]) -> "LowerBound":
        lb = cls(utility)
        for block, alpha in initial.items():
            values = _clamp_to_range(alpha.values, utility, "初期 α ベクトル")
            lb._initial[block] = values.copy()
            lb._alphas[block] = values[None, :].copy()
        return lb

    @classmethod
    def restore(
        cls, utility: UtilityBounds, initial: Dict[int, AlphaVector], alphas: Dict[int, np.ndarray]
    ) -> "LowerBound":
        """保存済みの Γ をそのまま復元する（支配判定はしない）"""
        lb = cls.from_initial(utility, initial)
        for block, rows in alphas.items():
            rows = np.asarray(rows, dtype=float)
            if rows.ndim != 2 or len(rows) == 0:
                raise EmptyBound("復元する Γ が空です", {"block": block})
            lb._alphas[block] = _clamp_to_range(rows, utility, "α ベクトル").copy()
        return lb

    @property
    def blocks(self) -> Iterable[int]:
        return self._alphas.keys()

    def alphas(self, block: int) -> np.ndarray:
        alphas = self._alphas.get(block)
        if alphas is None or len(alphas) == 0:
            raise EmptyBound("下界が初期化されていないブロックです", {"block": block})
        return alphas

    def initial_alpha(self, block: int) -> AlphaVector:
        if block not in self._initial:
            raise EmptyBound("初期 α ベクトルがありません", {"block": block})
        return AlphaVector(block, self._initial[block].copy())

    def _scores(self, b: Belief) -> np.ndarray:
        alphas = self.alphas(b.block)
        if alphas.shape[1] != b.probs.shape[0]:
            raise CrossBlockEvaluation("信念の次元がブロックと一致しません", {"block": b.block})
        return alphas @ b.probs

    def value(self, b: Belief) -> float:
        return float(self._scores(b).max())

    def best_alpha(self, b: Belief) -> AlphaVector:
        scores = self._scores(b)
        return AlphaVector(b.block, self._alphas[b.block][int(np.argmax(scores))].copy())

    def insert(self, alpha: AlphaVector) -> "LowerBound":
        """支配された要素を除いて α を追加する（同値は残す）"""
        values = _clamp_to_range(alpha.values, self.utility, "α ベクトル")
        current = self._alphas.get(alpha.block)
        if current is None:
            self._alphas[alpha.block] = values[None, :].copy()
            return self
        if current.shape[1] != values.shape[0]:
            raise CrossBlockEvaluation("α ベクトルの次元がブロックと一致しません", {"block": alpha.block})
        keep = np.any(current > values + TOLERANCE_CONFIG["dominance"], axis=1)
        self._alphas[alpha.block] = np.vstack([current[keep], values])
        return self

    def size(self, block: Optional[int] = None) -> int:
        if block is not None:
            return len(self._alphas.get(block, ()))
        return sum(len(a) for a in self._alphas.values())

    def copy(self) -> "LowerBound":
        lb = LowerBound(self.utility)
        lb._alphas = {k: v.copy() for k, v in self._alphas.items()}
        lb._initial = {k: v.copy() for k, v in self._initial.items()}
        return lb


def project_point_set(
    beliefs: np.ndarray, values: np.ndarray, delta: float, b: np.ndarray
) -> Tuple[float, np.ndarray]:
    """
    射影 LP: min Σλ_i y_i + δ Σ_s Δ_s
      s.t. Δ_s ≥ |Σλ_i b_i(s) − b(s)|, Σλ = 1, λ ≥ 0
    b' = Σλ_i b_i は代入して消去している
    """
    m, n = beliefs.shape
    if m == 1:
        return float(values[0] + delta * np.abs(beliefs[0] - b).sum()), np.ones(1)

    model = LpModel("ub_projection")
    lam = model.add_variables("lambda", m)
    dev = model.add_variables("Delta", n)
    model.set_objective(
        np.concatenate([lam, dev]), np.concatenate([values, np.full(n, delta)]), maximize=False
    )
    s_idx, i_idx = np.nonzero(beliefs.T)
    coef = beliefs.T[s_idx, i_idx]
    rows = np.concatenate([np.arange(n), s_idx])
    # Δ_s − Σλ_i b_i(s) ≥ −b(s)
    model.add_constraints(
        "dev_pos", rows, np.concatenate([dev, lam[i_idx]]), np.concatenate([np.ones(n), -coef]),
        GE, -b, count=n,
    )
    # Δ_s + Σλ_i b_i(s) ≥ b(s)
    model.add_constraints(
        "dev_neg", rows, np.concatenate([dev, lam[i_idx]]), np.concatenate([np.ones(n), coef]),
        GE, b, count=n,
    )
    model.add_constraint("lambda_sum", lam, 1.0, "=", 1.0)
    sol = solve_lp(model, raise_on_failure=True)
    return sol.objective_value, sol.values(lam)


class UpperBound:
    """上界 ov（ブロックごとに点集合 Υ を保持）"""

    def __init__(self, utility: UtilityBounds, prune_growth: float = 0.10):
        self.utility = utility
        self.delta = utility.delta
        self.prune_growth = prune_growth
        self._beliefs: Dict[int, np.ndarray] = {}
        self._values: Dict[int, np.ndarray] = {}
        self._size_at_prune: Dict[int, int] = {}
        self.prune_seconds = 0.0
        self.pruned_points = 0

    @classmethod
    def from_points(
        cls, utility: UtilityBounds, points: Dict[int, Tuple[np.ndarray, np.ndarray]], prune_growth: float = 0.10
    ) -> "UpperBound":
        ub = cls(utility, prune_growth)
        for block, (beliefs, values) in points.items():
            ub._beliefs[block] = np.asarray(beliefs, dtype=float).copy()
            ub._values[block] = np.clip(np.asarray(values, dtype=float), utility.L, utility.U)
            ub._size_at_prune[block] = len(values)
        return ub

    @property
    def blocks(self) -> Iterable[int]:
        return self._values.keys()

    def points(self, block: int) -> Tuple[np.ndarray, np.ndarray]:
        values = self._values.get(block)
        if values is None or len(values) == 0:
            raise EmptyBound("上界が初期化されていないブロックです", {"block": block})
        return self._beliefs[block], values

    def value(self, b: Belief) -> float:
        beliefs, values = self.points(b.block)
        if beliefs.shape[1] != b.probs.shape[0]:
            raise CrossBlockEvaluation("信念の次元がブロックと一致しません", {"block": b.block})
        value, _ = project_point_set(beliefs, values, self.delta, b.probs)
        return value

    def insert(self, b: Belief, y: float) -> "UpperBound":
        """点 (b, y) を追加し、前回の枝刈りから10%以上増えていれば枝刈りする"""
        y = float(_clamp_to_range(np.array([y]), self.utility, "上界の値")[0])
        if b.block not in self._values:
            self._beliefs[b.block] = b.probs[None, :].copy()
            self._values[b.block] = np.array([y])
            self._size_at_prune[b.block] = 1
            return self
        self._beliefs[b.block] = np.vstack([self._beliefs[b.block], b.probs])
        self._values[b.block] = np.append(self._values[b.block], y)
        size = len(self._values[b.block])
        threshold = max(self._size_at_prune[b.block] + 1,
                        math.ceil(self._size_at_prune[b.block] * (1.0 + self.prune_growth)))
        if size >= threshold:
            self.prune(b.block)
        return self

    def prune(self, block: Optional[int] = None) -> int:
        """
        y_i が他の点だけで作る包絡 ov(b_i) を厳密に上回る点を除く（1パス）
        戻り値は除いた点数
        """
        started = time.perf_counter()
        removed = 0
        for k in ([block] if block is not None else list(self._values)):
            beliefs, values = self._beliefs[k], self._values[k]
            keep = np.ones(len(values), dtype=bool)
            for i in range(len(values)):
                others = keep.copy()
                others[i] = False
                if not others.any():
                    continue
                envelope, _ = project_point_set(beliefs[others], values[others], self.delta, beliefs[i])
                if values[i] > envelope + TOLERANCE_CONFIG["prune"]:
                    keep[i] = False
            removed += int((~keep).sum())
            self._beliefs[k] = beliefs[keep]
            self._values[k] = values[keep]
            self._size_at_prune[k] = int(keep.sum())
        elapsed = time.perf_counter() - started
        self.prune_seconds += elapsed
        self.pruned_points += removed
        if removed:
            logger.debug(f"Υ 枝刈り: {removed} 点を削除 ({elapsed:.3f}s)")
        return removed

    def size(self, block: Optional[int] = None) -> int:
        if block is not None:
            return len(self._values.get(block, ()))
        return sum(len(v) for v in self._values.values())

    def copy(self) -> "UpperBound":
        ub = UpperBound(self.utility, self.prune_growth)
        ub._beliefs = {k: v.copy() for k, v in self._beliefs.items()}
        ub._values = {k: v.copy() for k, v in self._values.items()}
        ub._size_at_prune = dict(self._size_at_prune)
        return ub


def lb_value(lb: LowerBound, b: Belief) -> float:
    return lb.value(b)


def ub_value(ub: UpperBound, b: Belief) -> float:
    return ub.value(b)


def lb_insert(lb: LowerBound, alpha: AlphaVector) -> LowerBound:
    return lb.insert(alpha)


def ub_insert(ub: UpperBound, point: Tuple[Belief, float]) -> UpperBound:
    belief, value = point
    return ub.insert(belief, value)


def ub_prune(ub: UpperBound) -> UpperBound:
    ub.prune()
    return ub
