"""
ゲームモデルのテスト: 検証・1ステップ測度・信念更新
"""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from app.exceptions import (
    GammaOutOfRange,
    InvalidStrategy,
    NegativeProbability,
    PartitionLeak,
    RowSumMismatch,
    UnknownSymbol,
    ZeroProbabilityObservation,
)
from app.models.schemas import PartitionBlock, SuccessorEntry
from app.services.domains import gen_random
from app.services.game import (
    Belief,
    StageStrategy1,
    StageStrategy2,
    belief_update,
    prob_action_obs,
    stage_distribution,
    utility_bounds,
    validate_game,
)
from tests.conftest import make_game_file, single_state_file


class TestValidateGame:
    def test_single_state_game(self):
        game = validate_game(single_state_file(reward=2.0, gamma=0.5))
        assert game.n_states == 1
        assert len(game.blocks) == 1
        assert game.rewards[0, 0, 0] == 2.0

    def test_gamma_out_of_range(self):
        raw = single_state_file()
        raw.gamma = 1.0
        with pytest.raises(GammaOutOfRange):
            validate_game(raw)

    def test_negative_probability(self):
        raw = make_game_file(
            ["s", "t"], ["a"], ["b"], ["o"],
            {("s", "a", "b"): [("o", "s", 1.5), ("o", "t", -0.5)], ("t", "a", "b"): [("o", "t", 1.0)]},
        )
        with pytest.raises(NegativeProbability):
            validate_game(raw)

    def test_row_sum_mismatch(self):
        raw = make_game_file(["s"], ["a"], ["b"], ["o"], {("s", "a", "b"): [("o", "s", 0.9)]})
        with pytest.raises(RowSumMismatch):
            validate_game(raw)

    def test_missing_row_is_row_sum_mismatch(self):
        raw = make_game_file(["s"], ["a", "c"], ["b"], ["o"], {("s", "a", "b"): [("o", "s", 1.0)]})
        with pytest.raises(RowSumMismatch):
            validate_game(raw)

    def test_small_drift_is_renormalized(self):
        raw = make_game_file(
            ["s", "t"], ["a"], ["b"], ["o"],
            {
                ("s", "a", "b"): [("o", "s", 0.5), ("o", "t", 0.5 + 5e-10)],
                ("t", "a", "b"): [("o", "t", 1.0)],
            },
        )
        game = validate_game(raw)
        total = sum(p for _, _, p in game.transitions[(0, 0, 0)])
        assert total == pytest.approx(1.0, abs=1e-15)

    def test_unknown_symbol(self):
        raw = make_game_file(["s"], ["a"], ["b"], ["o"], {("s", "a", "b"): [("o", "nowhere", 1.0)]})
        with pytest.raises(UnknownSymbol):
            validate_game(raw)

    def test_partition_leak(self):
        # o だけでは後続ブロックが決まらない
        raw = make_game_file(
            ["s", "t"], ["a"], ["b", "c"], ["o"],
            {
                ("s", "a", "b"): [("o", "s", 1.0)],
                ("s", "a", "c"): [("o", "t", 1.0)],
                ("t", "a", "b"): [("o", "t", 1.0)],
                ("t", "a", "c"): [("o", "t", 1.0)],
            },
            partitions=[
                PartitionBlock(block="S", states=["s"], successors=[SuccessorEntry(a1="a", o="o", block="S")]),
                PartitionBlock(block="T", states=["t"], successors=[SuccessorEntry(a1="a", o="o", block="T")]),
            ],
        )
        with pytest.raises(PartitionLeak):
            validate_game(raw)

    def test_initial_belief_must_sit_in_one_block(self, pennies):
        assert pennies.blocks[pennies.initial_belief.block].name == "first"
        assert pennies.initial_belief.probs.tolist() == [1.0]


class TestUtilityBounds:
    def test_pennies(self, pennies):
        bounds = utility_bounds(pennies)
        assert bounds.U == pytest.approx((1 / 0.9) / 0.1)
        assert bounds.L == pytest.approx(-(1 / 0.9) / 0.1)
        assert bounds.delta == pytest.approx(bounds.span / 2)


class TestStageMeasure:
    def test_pennies_belief_update(self, pennies):
        p2 = StageStrategy2(np.array([[0.3, 0.7]]))
        b = belief_update(pennies, pennies.initial_belief, 0, p2, 0)
        assert pennies.blocks[b.block].name == "second"
        states = [pennies.states[s] for s in pennies.blocks[b.block].states]
        assert dict(zip(states, b.probs.tolist())) == pytest.approx({"sH": 0.3, "sT": 0.7})

    def test_zero_probability_observation(self, signal_game):
        p2 = StageStrategy2(np.array([[1.0, 0.0], [1.0, 0.0]]))
        with pytest.raises(ZeroProbabilityObservation):
            belief_update(signal_game, signal_game.initial_belief, 0, p2, 1)

    def test_invalid_strategy_shape(self, pennies):
        with pytest.raises(InvalidStrategy):
            stage_distribution(
                pennies, pennies.initial_belief, StageStrategy1.uniform(3), StageStrategy2.uniform(1, 2)
            )

    def test_belief_rejects_non_distribution(self):
        with pytest.raises(InvalidStrategy):
            Belief(0, np.array([0.6, 0.6]))

    @settings(max_examples=40, deadline=None)
    @given(
        seed=st.integers(0, 10_000),
        weights=st.lists(st.floats(0.01, 1.0), min_size=3, max_size=3),
        pi1=st.lists(st.floats(0.0, 1.0), min_size=2, max_size=2).filter(lambda v: sum(v) > 0.1),
    )
    def test_stage_measure_is_a_distribution(self, seed, weights, pi1):
        game = gen_random(3, 2, 2, 2, gamma=0.9, seed=seed)
        b = Belief.from_weights(0, np.array(weights))
        p1 = StageStrategy1(np.array(pi1) / sum(pi1))
        p2 = StageStrategy2(np.random.default_rng(seed).dirichlet(np.ones(2), size=3))

        dist = stage_distribution(game, b, p1, p2)
        assert sum(dist.values()) == pytest.approx(1.0, abs=1e-9)

        total = sum(prob_action_obs(game, b, p1, p2, a1, o) for a1 in range(2) for o in range(2))
        assert total == pytest.approx(1.0, abs=1e-9)

        for a1 in range(2):
            for o in range(2):
                if prob_action_obs(game, b, p1, p2, a1, o) > 0:
                    updated = belief_update(game, b, a1, p2, o)
                    assert updated.probs.sum() == pytest.approx(1.0)
                    assert np.all(updated.probs >= 0)

    def test_joint_roundtrip_keeps_uniform_off_support(self):
        b = np.array([0.0, 1.0])
        joint = np.array([[0.0, 0.0], [0.25, 0.75]])
        p2 = StageStrategy2.from_joint(joint, b)
        assert p2.cond.tolist() == [[0.5, 0.5], [0.25, 0.75]]
        assert np.allclose(p2.joint(b), joint)
