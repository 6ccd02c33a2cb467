"""
LP インターフェースのテスト（双対値の符号規約を含む）
"""
import numpy as np
import pytest

from app.exceptions import LpInfeasible, LpUnbounded
from app.services.lp import EQ, GE, LE, LpModel, LpStatus, solve_lp


def test_max_with_upper_row_dual_is_one():
    model = LpModel("toy")
    x = model.add_variable("x")
    row = model.add_constraint("cap", x, 1.0, LE, 3.0)
    model.set_objective(x, 1.0, maximize=True)
    sol = solve_lp(model)
    assert sol.is_optimal
    assert sol.objective_value == pytest.approx(3.0)
    assert sol.duals([row])[0] == pytest.approx(1.0)


def test_min_with_lower_row():
    model = LpModel("toy")
    x = model.add_variable("x")
    row = model.add_constraint("floor", x, 1.0, GE, 2.0)
    model.set_objective(x, 1.0, maximize=False)
    sol = solve_lp(model)
    assert sol.objective_value == pytest.approx(2.0)
    # 右辺を増やすと最小値も増える
    assert sol.dual[row] == pytest.approx(1.0)


def test_max_with_lower_row_dual_is_negative():
    model = LpModel("toy")
    x = model.add_variable("x")
    row = model.add_constraint("floor", x, 1.0, GE, 2.0)
    model.set_objective(x, -1.0, maximize=True)
    sol = solve_lp(model)
    assert sol.objective_value == pytest.approx(-2.0)
    assert sol.dual[row] == pytest.approx(-1.0)


def test_equality_dual():
    model = LpModel("toy")
    xy = model.add_variables("xy", 2, ub=3.0)
    row = model.add_constraint("sum", xy, 1.0, EQ, 4.0)
    model.set_objective(xy, np.array([1.0, 2.0]), maximize=True)
    sol = solve_lp(model)
    # y = 3, x = 1 で x の係数が限界価値
    assert sol.values(xy) == pytest.approx([1.0, 3.0])
    assert sol.dual[row] == pytest.approx(1.0)


def test_batched_constraints_and_names():
    model = LpModel("batch")
    x = model.add_variables("x", 3)
    rows = model.add_constraints("cap", np.arange(3), x, np.ones(3), LE, np.array([1.0, 2.0, 3.0]))
    model.set_objective(x, 1.0, maximize=True)
    sol = solve_lp(model)
    assert sol.objective_value == pytest.approx(6.0)
    assert sol.duals(rows) == pytest.approx([1.0, 1.0, 1.0])
    assert list(sol.dual_map(model)) == ["cap[0]", "cap[1]", "cap[2]"]


def test_infeasible_status_and_exception():
    model = LpModel("bad")
    x = model.add_variable("x", ub=1.0)
    model.add_constraint("floor", x, 1.0, GE, 2.0)
    model.set_objective(x, 1.0, maximize=True)
    assert solve_lp(model).status == LpStatus.INFEASIBLE
    with pytest.raises(LpInfeasible):
        solve_lp(model, raise_on_failure=True)


def test_unbounded():
    model = LpModel("open")
    x = model.add_variable("x")
    model.add_constraint("floor", x, 1.0, GE, 1.0)
    model.set_objective(x, 1.0, maximize=True)
    # HiGHS は presolve で「非有界または実行不可能」とだけ返すことがある
    assert solve_lp(model).status in (LpStatus.UNBOUNDED, LpStatus.INFEASIBLE)
    with pytest.raises((LpUnbounded, LpInfeasible)):
        solve_lp(model, raise_on_failure=True)


def test_undeclared_variable_is_rejected():
    model = LpModel("bad")
    model.add_variable("x")
    with pytest.raises(ValueError):
        model.add_constraint("c", [3], 1.0, LE, 1.0)


def test_lp_format_dump():
    model = LpModel("dump")
    x = model.add_variables("x", 2, lb=-np.inf)
    model.add_constraint("sum", x, 1.0, EQ, 1.0)
    model.set_objective(x, np.array([1.0, -1.0]), maximize=True)
    text = model.to_lp_format()
    assert text.startswith("\\ dump\nMaximize")
    assert " sum_0: + 1 x_0 + 1 x_1 = 1" in text
    assert "-inf <= x_0 <= +inf" in text
