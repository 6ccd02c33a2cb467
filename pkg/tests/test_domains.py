"""
ドメイン生成器のテスト
"""
import numpy as np
import pytest

from app.exceptions import DisconnectedGraph, GeneratorError
from app.services.domains import (
    gen_matching_pennies,
    gen_patrolling,
    gen_pursuit,
    gen_random,
    gen_search,
    gen_tiger,
    generate,
)
from app.services.domains.patrolling import connected_graph, scale_costs
from app.services.storage import game_hash


@pytest.mark.parametrize(
    "family,params",
    [
        ("pursuit", {"rows": 2, "cols": 2, "pursuers": 1}),
        ("search", {"width": 3, "config": "1-1"}),
        ("search", {"width": 3, "config": "2-1"}),
        ("patrolling", {"vertices": 4, "edge_prob": 0.6, "seed": 2}),
        ("pennies", {}),
        ("random", {"n_states": 3, "n_actions1": 2, "n_actions2": 2}),
        ("tiger", {}),
    ],
)
def test_generators_produce_valid_games(family, params):
    game = generate(family, **params)
    assert game.n_states > 0
    assert game.metadata["family"] == family
    b0 = game.initial_belief
    assert b0.probs.sum() == pytest.approx(1.0)


def test_generators_are_deterministic():
    assert game_hash(gen_random(3, 2, 2, 2, seed=5)) == game_hash(gen_random(3, 2, 2, 2, seed=5))
    assert game_hash(gen_random(3, 2, 2, 2, seed=5)) != game_hash(gen_random(3, 2, 2, 2, seed=6))
    assert game_hash(gen_patrolling(5, 0.5, seed=1)) == game_hash(gen_patrolling(5, 0.5, seed=1))


def test_unknown_family_and_bad_params():
    with pytest.raises(GeneratorError):
        generate("chess")
    with pytest.raises(GeneratorError):
        generate("pennies", width=3)


@pytest.mark.parametrize("gamma", [0.0, 1.0, 1.5])
def test_gamma_must_be_in_open_unit_interval(gamma):
    with pytest.raises(GeneratorError):
        gen_matching_pennies(gamma)
    with pytest.raises(GeneratorError):
        gen_pursuit(1, 2, gamma=gamma)


class TestPursuit:
    START, SWAPPED = "p0_0|e0_1", "p0_1|e0_0"

    @staticmethod
    def _outcome(game, state, a1, a2):
        s, i, j = game.states.index(state), game.actions1.index(a1), game.actions2.index(a2)
        (o, s2, p), = game.transitions[(s, i, j)]
        assert p == 1.0
        return game.observations[o], game.states[s2], float(game.rewards[s, i, j])

    def test_smallest_board(self):
        game = gen_pursuit(1, 2, 1, gamma=0.95)
        # 初期配置・入れ替わり・捕獲後の吸収状態
        assert set(game.states) == {self.START, self.SWAPPED, "T"}
        assert sorted(block.name for block in game.blocks) == ["T", "p0_0", "p0_1"]
        assert all(len(block.states) == 1 for block in game.blocks)
        b0 = game.initial_belief
        assert game.states[game.blocks[b0.block].states[0]] == self.START

    def test_smallest_board_capture_geometry(self):
        game = gen_pursuit(1, 2, 1, gamma=0.95)
        capture = ("capture", "T", 100.0)
        stay_or_wall = ("up", "down")

        # 追跡者 (0,0)、逃走者 (0,1)
        assert self._outcome(game, self.START, "right", "left") == ("none", self.SWAPPED, 0.0)
        for a2 in ("right",) + stay_or_wall:
            assert self._outcome(game, self.START, "right", a2) == capture
        for a1 in ("left",) + stay_or_wall:
            assert self._outcome(game, self.START, a1, "left") == capture
            for a2 in ("right",) + stay_or_wall:
                assert self._outcome(game, self.START, a1, a2) == ("none", self.START, 0.0)

        # 追跡者 (0,1)、逃走者 (0,0)
        assert self._outcome(game, self.SWAPPED, "left", "right") == ("none", self.START, 0.0)
        for a2 in ("left",) + stay_or_wall:
            assert self._outcome(game, self.SWAPPED, "left", a2) == capture
        for a1 in ("right",) + stay_or_wall:
            assert self._outcome(game, self.SWAPPED, a1, "right") == capture
            for a2 in ("left",) + stay_or_wall:
                assert self._outcome(game, self.SWAPPED, a1, a2) == ("none", self.SWAPPED, 0.0)

        for a1 in game.actions1:
            for a2 in game.actions2:
                assert self._outcome(game, "T", a1, a2) == ("none", "T", 0.0)

    def test_blocks_are_pursuer_positions(self):
        game = gen_pursuit(2, 2, 1)
        for block in game.blocks:
            names = [game.states[s] for s in block.states]
            assert len({name.split("|")[0] for name in names}) == 1

    def test_invalid_board(self):
        with pytest.raises(GeneratorError):
            gen_pursuit(1, 1)
        with pytest.raises(GeneratorError):
            gen_pursuit(0, 2)
        with pytest.raises(GeneratorError):
            gen_pursuit(2, 2, pursuers=0)

    def test_single_column_board(self):
        game = gen_pursuit(2, 1, 1)
        assert set(game.states) == {"p0_0|e1_0", "p1_0|e0_0", "T"}


class TestSearch:
    def test_rewards(self):
        game = gen_search(3, "1-1")
        assert game.rewards.min() == -100.0
        assert game.rewards.max() == 0.0

    def test_unknown_config(self):
        with pytest.raises(GeneratorError):
            gen_search(3, "3-3")


class TestPatrolling:
    def test_costs_are_scaled(self):
        game = gen_patrolling(7, 0.25, attack_time=3, gamma=0.95, seed=1)
        assert max(game.metadata["costs"]) == pytest.approx(100 / 0.95 ** 3)
        assert game.rewards.min() == pytest.approx(-100 / 0.95 ** 3)

    def test_scale_costs(self):
        scaled = scale_costs([1.0, 2.0], gamma=0.5, attack_time=2)
        assert scaled.tolist() == pytest.approx([200.0, 400.0])
        with pytest.raises(GeneratorError):
            scale_costs([0.0, 0.0], gamma=0.5, attack_time=2)

    def test_disconnected_graph(self):
        with pytest.raises(DisconnectedGraph):
            connected_graph(6, 0.01, seed=0, retry_budget=3)

    def test_connected_graph_retries(self):
        graph = connected_graph(5, 0.5, seed=0)
        assert graph.number_of_nodes() == 5
        assert "seed" in graph.graph

    def test_metadata_records_graph(self):
        game = gen_patrolling(4, 0.6, seed=2)
        assert game.metadata["vertices"] == 4
        assert all(len(edge) == 2 for edge in game.metadata["edges"])


class TestSmallGames:
    def test_pennies_structure(self, pennies):
        assert [block.name for block in pennies.blocks] == ["first", "second", "sink"]
        assert pennies.rewards.max() == pytest.approx(1 / 0.9)

    def test_tiger_structure(self):
        game = gen_tiger(0.9, listen_accuracy=0.85)
        assert game.n_states == 2 and game.n_actions1 == 3 and game.n_actions2 == 1
        assert len(game.blocks) == 1
        assert np.all(game.rewards[:, 0, 0] == -1.0)
        with pytest.raises(GeneratorError):
            gen_tiger(0.9, listen_accuracy=0.3)

    def test_random_support(self):
        game = gen_random(4, 2, 2, 2, seed=1, support=2)
        assert all(len(out) <= 2 for out in game.transitions.values())
