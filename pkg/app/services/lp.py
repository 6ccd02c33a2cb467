"""
線形計画の最小インターフェース
変数・線形制約・目的関数を組み立て、HiGHS (scipy.optimize.linprog) で解き、
主変数・目的値・制約ごとの双対値を返す

双対値は「その制約の右辺を増やしたときの（モデル自身の向きでの）最適値の変化率」。
max x s.t. x <= 3 なら x<=3 の双対値は 1
"""
import logging
import os
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from app.config import LP_CONFIG
from app.exceptions import LpInfeasible, LpUnbounded, NumericalFailure

logger = logging.getLogger(__name__)

LE, EQ, GE = "<=", "=", ">="
_SENSES = (LE, EQ, GE)


class LpStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


@dataclass
class _VariableGroup:
    name: str
    start: int
    count: int


@dataclass
class _ConstraintGroup:
    name: str
    start: int
    count: int


class LpModel:
    """
    LP モデル
    変数・制約は名前付きのグループ単位で追加し、挿入順が正準順序になる
    """

    def __init__(self, name: str = "lp"):
        self.name = name
        self._lb: List[np.ndarray] = []
        self._ub: List[np.ndarray] = []
        self._var_groups: List[_VariableGroup] = []
        self._n_vars = 0
        self._rows: List[np.ndarray] = []
        self._cols: List[np.ndarray] = []
        self._vals: List[np.ndarray] = []
        self._senses: List[np.ndarray] = []
        self._rhs: List[np.ndarray] = []
        self._con_groups: List[_ConstraintGroup] = []
        self._n_cons = 0
        self._objective = np.zeros(0)
        self._obj_cols: Optional[np.ndarray] = None
        self._obj_vals: Optional[np.ndarray] = None
        self.maximize = False

    # --- 変数 ---

    def add_variables(
        self, name: str, count: int, lb: float = 0.0, ub: float = np.inf
    ) -> np.ndarray:
        """count 個の変数を追加し、その列インデックスを返す"""
        if count < 0:
            raise ValueError("count は非負である必要があります")
        start = self._n_vars
        self._var_groups.append(_VariableGroup(name, start, count))
        self._lb.append(np.full(count, lb, dtype=float))
        self._ub.append(np.full(count, ub, dtype=float))
        self._n_vars += count
        return np.arange(start, start + count)

    def add_variable(self, name: str, lb: float = 0.0, ub: float = np.inf) -> int:
        return int(self.add_variables(name, 1, lb, ub)[0])

    def set_lower_bounds(self, cols: np.ndarray, values: np.ndarray) -> None:
        lb = np.concatenate(self._lb) if self._lb else np.zeros(0)
        lb[np.asarray(cols)] = values
        self._lb = [lb]
        self._ub = [np.concatenate(self._ub)]

    @property
    def n_variables(self) -> int:
        return self._n_vars

    @property
    def n_constraints(self) -> int:
        return self._n_cons

    # --- 制約 ---

    def add_constraints(
        self,
        name: str,
        rows: np.ndarray,
        cols: np.ndarray,
        coefs: np.ndarray,
        sense: str,
        rhs,
        count: Optional[int] = None,
    ) -> np.ndarray:
        """
        制約族を COO 形式で追加する
        rows は族内の局所行番号（0..count-1）、戻り値は大域行インデックス
        """
        if sense not in _SENSES:
            raise ValueError(f"不明な制約の向き: {sense}")
        rows = np.asarray(rows, dtype=int)
        cols = np.asarray(cols, dtype=int)
        coefs = np.asarray(coefs, dtype=float)
        if count is None:
            count = int(rows.max()) + 1 if rows.size else 0
        rhs = np.broadcast_to(np.asarray(rhs, dtype=float), (count,)).copy()
        if coefs.size and not np.all(np.isfinite(coefs)):
            raise ValueError(f"制約 {name} に有限でない係数があります")
        if cols.size and (cols.min() < 0 or cols.max() >= self._n_vars):
            raise ValueError(f"制約 {name} が未宣言の変数を参照しています")
        start = self._n_cons
        self._con_groups.append(_ConstraintGroup(name, start, count))
        self._rows.append(rows + start)
        self._cols.append(cols)
        self._vals.append(coefs)
        self._senses.append(np.full(count, _SENSES.index(sense), dtype=int))
        self._rhs.append(rhs)
        self._n_cons += count
        return np.arange(start, start + count)

    def add_constraint(self, name: str, cols, coefs, sense: str, rhs: float) -> int:
        cols = np.atleast_1d(np.asarray(cols, dtype=int))
        coefs = np.broadcast_to(np.asarray(coefs, dtype=float), cols.shape)
        return int(
            self.add_constraints(name, np.zeros(cols.size, dtype=int), cols, coefs, sense, rhs, count=1)[0]
        )

    # --- 目的関数 ---

    def set_objective(self, cols, coefs, maximize: bool) -> None:
        self._obj_cols = np.atleast_1d(np.asarray(cols, dtype=int))
        self._obj_vals = np.broadcast_to(np.asarray(coefs, dtype=float), self._obj_cols.shape)
        self.maximize = maximize

    # --- 組み立て ---

    def _assemble(self):
        lb = np.concatenate(self._lb) if self._lb else np.zeros(0)
        ub = np.concatenate(self._ub) if self._ub else np.zeros(0)
        c = np.zeros(self._n_vars)
        if self._obj_cols is not None:
            np.add.at(c, self._obj_cols, self._obj_vals)
        if self._n_cons:
            matrix = sparse.csr_matrix(
                (np.concatenate(self._vals), (np.concatenate(self._rows), np.concatenate(self._cols))),
                shape=(self._n_cons, self._n_vars),
            )
            senses = np.concatenate(self._senses)
            rhs = np.concatenate(self._rhs)
        else:
            matrix = sparse.csr_matrix((0, self._n_vars))
            senses = np.zeros(0, dtype=int)
            rhs = np.zeros(0)
        return c, lb, ub, matrix, senses, rhs

    def variable_names(self) -> List[str]:
        names: List[str] = []
        for group in self._var_groups:
            names.extend(f"{group.name}[{i}]" for i in range(group.count))
        return names

    def constraint_names(self) -> List[str]:
        names: List[str] = []
        for group in self._con_groups:
            names.extend(f"{group.name}[{i}]" for i in range(group.count))
        return names

    def to_lp_format(self) -> str:
        """CPLEX LP 形式のテキスト（外部ソルバーでの照合用）"""
        c, lb, ub, matrix, senses, rhs = self._assemble()
        vnames = [_lp_name(n) for n in self.variable_names()]
        cnames = [_lp_name(n) for n in self.constraint_names()]

        def expr(indices, values) -> str:
            terms = [f"{'+' if v >= 0 else '-'} {abs(v):.17g} {vnames[j]}" for j, v in zip(indices, values)]
            return " ".join(terms) if terms else "0 " + (vnames[0] if vnames else "")

        lines = [f"\\ {self.name}", "Maximize" if self.maximize else "Minimize"]
        nz = np.flatnonzero(c)
        lines.append(f" obj: {expr(nz, c[nz])}")
        lines.append("Subject To")
        for i in range(matrix.shape[0]):
            row = matrix.getrow(i)
            op = ("<=", "=", ">=")[senses[i]]
            lines.append(f" {cnames[i]}: {expr(row.indices, row.data)} {op} {rhs[i]:.17g}")
        lines.append("Bounds")
        for j, name in enumerate(vnames):
            lo = "-inf" if np.isneginf(lb[j]) else f"{lb[j]:.17g}"
            hi = "+inf" if np.isposinf(ub[j]) else f"{ub[j]:.17g}"
            lines.append(f" {lo} <= {name} <= {hi}")
        lines.append("End")
        return "\n".join(lines) + "\n"


def _lp_name(name: str) -> str:
    return name.replace("[", "_").replace("]", "").replace(",", "_")


@dataclass
class LpSolution:
    """LP の解（最適時は主変数・双対値を含む）"""
    status: LpStatus
    objective_value: float
    primal: np.ndarray
    dual: np.ndarray
    iterations: int = 0

    @property
    def is_optimal(self) -> bool:
        return self.status == LpStatus.OPTIMAL

    def values(self, cols) -> np.ndarray:
        return self.primal[np.asarray(cols)]

    def duals(self, rows) -> np.ndarray:
        return self.dual[np.asarray(rows)]

    def primal_map(self, model: LpModel) -> Dict[str, float]:
        return dict(zip(model.variable_names(), self.primal.tolist()))

    def dual_map(self, model: LpModel) -> Dict[str, float]:
        return dict(zip(model.constraint_names(), self.dual.tolist()))


def solve_lp(model: LpModel, raise_on_failure: bool = False) -> LpSolution:
    """
    LP を解く
    Infeasible / Unbounded はステータスで返す（raise_on_failure=True なら例外）。
    収束失敗は常に NumericalFailure
    """
    c, lb, ub, matrix, senses, rhs = model._assemble()
    sign = -1.0 if model.maximize else 1.0

    le_rows = np.flatnonzero(senses == 0)
    ge_rows = np.flatnonzero(senses == 2)
    eq_rows = np.flatnonzero(senses == 1)
    ub_rows = np.concatenate([le_rows, ge_rows])
    row_sign = np.concatenate([np.ones(le_rows.size), -np.ones(ge_rows.size)])

    A_ub = b_ub = A_eq = b_eq = None
    if ub_rows.size:
        A_ub = sparse.diags(row_sign) @ matrix[ub_rows]
        b_ub = row_sign * rhs[ub_rows]
    if eq_rows.size:
        A_eq = matrix[eq_rows]
        b_eq = rhs[eq_rows]

    bounds = np.column_stack([lb, ub]) if model.n_variables else None
    if LP_CONFIG["dump_dir"]:
        _dump(model)

    res = linprog(
        sign * c,
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=bounds,
        method=LP_CONFIG["method"],
    )

    if res.status == 2:
        if raise_on_failure:
            raise LpInfeasible(f"LP {model.name} が実行不可能です")
        return LpSolution(LpStatus.INFEASIBLE, np.nan, np.zeros(0), np.zeros(0))
    if res.status == 3:
        if raise_on_failure:
            raise LpUnbounded(f"LP {model.name} が非有界です")
        return LpSolution(LpStatus.UNBOUNDED, np.inf * -sign, np.zeros(0), np.zeros(0))
    if res.status != 0:
        logger.error(f"LP {model.name} 求解失敗: status={res.status}, {res.message}")
        raise NumericalFailure(
            f"LP {model.name} の求解に失敗しました", {"status": res.status, "message": res.message}
        )

    dual = np.zeros(model.n_constraints)
    if ub_rows.size:
        # ineqlin.marginals = ∂(sign·obj)/∂b_ub、≥ 行は符号反転して格納済み
        dual[ub_rows] = sign * row_sign * res.ineqlin.marginals
    if eq_rows.size:
        dual[eq_rows] = sign * res.eqlin.marginals

    return LpSolution(
        status=LpStatus.OPTIMAL,
        objective_value=float(sign * res.fun),
        primal=np.asarray(res.x, dtype=float),
        dual=dual,
        iterations=int(getattr(res, "nit", 0) or 0),
    )


_dump_counter = 0


def _dump(model: LpModel) -> None:
    global _dump_counter
    _dump_counter += 1
    path = os.path.join(LP_CONFIG["dump_dir"], f"{_dump_counter:06d}_{_lp_name(model.name)}.lp")
    os.makedirs(LP_CONFIG["dump_dir"], exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(model.to_lp_format())
