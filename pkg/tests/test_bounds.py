"""
上下界のテスト: Γ の支配除去、射影 LP、Lipschitz 性、単調な精緻化、枝刈り
"""
import numpy as np
import pytest

from app.exceptions import CrossBlockEvaluation, EmptyBound, RangeViolation
from app.services.bounds import (
    AlphaVector,
    LowerBound,
    UpperBound,
    lb_insert,
    lb_value,
    project_point_set,
    ub_insert,
    ub_prune,
    ub_value,
)
from app.services.game import Belief, UtilityBounds
from app.services.hsvi import point_update, sample_beliefs
from app.services.init_bounds import initial_bounds

UTILITY = UtilityBounds(L=-10.0, U=10.0, delta=10.0)


def _belief(p: float) -> Belief:
    return Belief(0, np.array([p, 1.0 - p]))


class TestLowerBound:
    def test_dominated_rows_are_removed(self):
        lb = LowerBound.from_initial(UTILITY, {0: AlphaVector(0, np.array([0.0, 0.0]))})
        lb.insert(AlphaVector(0, np.array([1.0, 1.0])))
        assert lb.size(0) == 1
        lb.insert(AlphaVector(0, np.array([3.0, -1.0])))
        assert lb.size(0) == 2
        assert lb.value(_belief(1.0)) == pytest.approx(3.0)
        assert lb.value(_belief(0.0)) == pytest.approx(1.0)

    def test_equal_rows_are_kept(self):
        lb = LowerBound.from_initial(UTILITY, {0: AlphaVector(0, np.array([1.0, 1.0]))})
        lb.insert(AlphaVector(0, np.array([1.0, 1.0])))
        # 新しい行は常に入り、同値の古い行は残る
        assert lb.size(0) == 2

    def test_range_violation(self):
        lb = LowerBound.from_initial(UTILITY, {0: AlphaVector(0, np.array([0.0, 0.0]))})
        with pytest.raises(RangeViolation):
            lb.insert(AlphaVector(0, np.array([11.0, 0.0])))

    def test_tiny_overshoot_is_clamped(self):
        lb = LowerBound.from_initial(UTILITY, {0: AlphaVector(0, np.array([0.0, 0.0]))})
        lb.insert(AlphaVector(0, np.array([10.0 + 1e-8, 0.0])))
        assert lb.value(_belief(1.0)) == 10.0

    def test_cross_block(self):
        lb = LowerBound.from_initial(UTILITY, {0: AlphaVector(0, np.array([0.0, 0.0]))})
        with pytest.raises(EmptyBound):
            lb.value(Belief(1, np.array([1.0])))
        with pytest.raises(CrossBlockEvaluation):
            AlphaVector(0, np.zeros(2)).evaluate(Belief(1, np.array([0.5, 0.5])))

    def test_restore_rejects_empty_rows(self):
        initial = {0: AlphaVector(0, np.zeros(2))}
        with pytest.raises(EmptyBound):
            LowerBound.restore(UTILITY, initial, {0: np.zeros((0, 2))})


class TestUpperBound:
    def test_single_point_closed_form(self):
        ub = UpperBound.from_points(UTILITY, {0: (np.array([[1.0, 0.0]]), np.array([2.0]))})
        # y + δ‖b − b1‖₁
        assert ub.value(_belief(0.75)) == pytest.approx(2.0 + 10.0 * 0.5)

    def test_interpolates_between_vertices(self):
        ub = UpperBound.from_points(
            UTILITY, {0: (np.eye(2), np.array([4.0, 0.0]))}
        )
        assert ub.value(_belief(0.25)) == pytest.approx(1.0)
        assert ub.value(_belief(1.0)) == pytest.approx(4.0)

    def test_projection_never_exceeds_vertex_interpolation(self, rng):
        beliefs = rng.dirichlet(np.ones(3), size=6)
        values = rng.uniform(-5, 5, size=6)
        for _ in range(20):
            b = rng.dirichlet(np.ones(3))
            value, lam = project_point_set(beliefs, values, 10.0, b)
            assert lam.sum() == pytest.approx(1.0, abs=1e-7)
            assert value <= values.min() + 10.0 * np.abs(beliefs[values.argmin()] - b).sum() + 1e-7

    def test_lipschitz(self, rng):
        delta = 3.0
        utility = UtilityBounds(L=-10.0, U=10.0, delta=delta)
        beliefs = rng.dirichlet(np.ones(3), size=8)
        values = rng.uniform(-5, 5, size=8)
        ub = UpperBound.from_points(utility, {0: (beliefs, values)})
        for _ in range(1000):
            b1 = Belief(0, rng.dirichlet(np.ones(3)))
            b2 = Belief(0, rng.dirichlet(np.ones(3)))
            gap = abs(ub.value(b1) - ub.value(b2))
            assert gap <= delta * np.abs(b1.probs - b2.probs).sum() + 1e-6

    def test_insert_triggers_prune_on_growth(self):
        ub = UpperBound.from_points(UTILITY, {0: (np.eye(2), np.array([1.0, 1.0]))}, prune_growth=0.10)
        # 頂点の包絡 1.0 を上回る点は冗長
        ub.insert(_belief(0.5), 5.0)
        assert ub.size(0) == 2
        assert ub.pruned_points == 1

    def test_prune_preserves_values(self, rng):
        beliefs = np.vstack([np.eye(3), rng.dirichlet(np.ones(3), size=15)])
        values = rng.uniform(-5, 5, size=len(beliefs))
        ub = UpperBound.from_points(UTILITY, {0: (beliefs, values)})
        samples = [Belief(0, rng.dirichlet(np.ones(3))) for _ in range(100)]
        before = [ub.value(b) for b in samples]
        ub.prune()
        after = [ub.value(b) for b in samples]
        assert after == pytest.approx(before, abs=1e-7)
        assert ub.size(0) <= len(values)

    def test_empty_block(self):
        ub = UpperBound(UTILITY)
        with pytest.raises(EmptyBound):
            ub.value(_belief(0.5))


class TestRefinement:
    def test_point_updates_refine_monotonically(self, random_game, rng):
        lb, ub, _, _ = initial_bounds(random_game)
        samples = sample_beliefs(random_game, 0, 12, rng)
        lower = np.array([lb.value(b) for b in samples])
        upper = np.array([ub.value(b) for b in samples])
        for b in sample_beliefs(random_game, 0, 200, rng):
            point_update(random_game, b, lb, ub)
            new_lower = np.array([lb.value(p) for p in samples])
            new_upper = np.array([ub.value(p) for p in samples])
            assert np.all(new_lower >= lower - 1e-8)
            assert np.all(new_upper <= upper + 1e-6)
            assert np.all(new_lower <= new_upper + 1e-6)
            lower, upper = new_lower, new_upper


def test_functional_api():
    lb = LowerBound.from_initial(UTILITY, {0: AlphaVector(0, np.array([0.0, 0.0]))})
    ub = UpperBound.from_points(UTILITY, {0: (np.eye(2), np.array([4.0, 4.0]))})
    assert lb_insert(lb, AlphaVector(0, np.array([2.0, 1.0]))) is lb
    assert lb_value(lb, _belief(0.5)) == pytest.approx(1.5)
    assert ub_insert(ub, (_belief(0.5), 2.0)) is ub
    assert ub_value(ub, _belief(0.5)) == pytest.approx(2.0)
    # 中点の追加で頂点は冗長にならない
    assert ub_prune(ub).size(0) == 3
