"""
巡回ゲーム (patrolling game)
巡回者（プレイヤー1）は Erdős–Rényi グラフ上を移動し、攻撃者（プレイヤー2）は
任意の時点で頂点 u への攻撃を開始できる。t_x ステップ以内に巡回者が u に来なければ
損失 −C(u)。巡回者は攻撃の有無を観測できない
"""
import logging
from typing import Dict, List, Optional, Sequence

import networkx as nx
import numpy as np

from app.config import DOMAIN_DEFAULTS
from app.exceptions import DisconnectedGraph, GeneratorError
from app.services.domains.builder import GameBuilder, check_gamma
from app.services.game import Game

logger = logging.getLogger(__name__)

END = "end"


def connected_graph(
    vertices: int, edge_prob: float, seed: int, retry_budget: Optional[int] = None
) -> nx.Graph:
    """連結な G(n, p) グラフ。非連結なら seed を1ずつ増やして再生成する"""
    retry_budget = DOMAIN_DEFAULTS["patrol_retry_budget"] if retry_budget is None else retry_budget
    for attempt in range(retry_budget):
        graph = nx.erdos_renyi_graph(vertices, edge_prob, seed=seed + attempt)
        if nx.is_connected(graph):
            if attempt:
                logger.info(f"連結グラフを seed={seed + attempt} で生成しました ({attempt} 回再試行)")
            graph.graph["seed"] = seed + attempt
            return graph
    raise DisconnectedGraph(
        "再試行しても連結グラフが得られませんでした",
        {"vertices": vertices, "edge_prob": edge_prob, "seed": seed, "retries": retry_budget},
    )


def scale_costs(costs: Sequence[float], gamma: float, attack_time: int) -> np.ndarray:
    """最大コストを 100/γ^t_x に揃える（防御側の最小割引利得が −100）"""
    costs = np.asarray(costs, dtype=float)
    if costs.size == 0 or np.any(costs < 0) or costs.max() <= 0:
        raise GeneratorError("コストは非負で、少なくとも1つ正である必要があります")
    return costs * (100.0 / gamma ** attack_time) / costs.max()


def patrolling_builder(
    vertices: int,
    edge_prob: Optional[float] = None,
    attack_time: int = 3,
    costs: Optional[Sequence[float]] = None,
    gamma: Optional[float] = None,
    seed: int = 0,
    graph: Optional[nx.Graph] = None,
) -> GameBuilder:
    gamma = DOMAIN_DEFAULTS["gamma"] if gamma is None else gamma
    edge_prob = DOMAIN_DEFAULTS["patrol_edge_prob"] if edge_prob is None else edge_prob
    check_gamma(gamma)
    if vertices < 2:
        raise GeneratorError("頂点数は2以上必要です", {"vertices": vertices})
    if attack_time < 1:
        raise GeneratorError("攻撃時間 t_x は1以上必要です", {"attack_time": attack_time})
    if not 0.0 < edge_prob <= 1.0:
        raise GeneratorError("辺の確率は (0,1] の範囲である必要があります", {"edge_prob": edge_prob})

    if graph is None:
        graph = connected_graph(vertices, edge_prob, seed)
    elif graph.number_of_nodes() != vertices or not nx.is_connected(graph):
        raise GeneratorError("与えられたグラフが頂点数と一致しないか非連結です")
    if costs is None:
        costs = np.random.default_rng(seed).uniform(0.5, 1.0, size=vertices)
    if len(costs) != vertices:
        raise GeneratorError("コストの数が頂点数と一致しません", {"costs": len(costs), "vertices": vertices})
    cost = scale_costs(costs, gamma, attack_time)
    neighbours: Dict[int, set] = {v: set(graph.neighbors(v)) for v in range(vertices)}

    actions1 = [f"go:{j}" for j in range(vertices)]
    actions2 = ["wait"] + [f"attack:{u}" for u in range(vertices)]

    def patrol(v: int, a1: int) -> int:
        """隣接していない頂点への移動はその場に留まる"""
        return a1 if a1 in neighbours[v] else v

    def step(state, a1: int, a2: int):
        if state == END:
            return [(END, END, 1.0)]
        v, attack = state
        if attack is not None and attack[1] == 0:
            return [(END, END, 1.0)]
        moved = patrol(v, a1)
        if attack is None:
            if a2 == 0:
                return [("none", (moved, None), 1.0)]
            target, remaining = a2 - 1, attack_time - 1
        else:
            target, remaining = attack[0], attack[1] - 1
        if moved == target:
            return [(END, END, 1.0)]
        return [("none", (moved, (target, remaining)), 1.0)]

    def reward(state, a1: int, a2: int) -> float:
        if state == END:
            return 0.0
        _, attack = state
        if attack is not None and attack[1] == 0:
            return -float(cost[attack[0]])
        return 0.0

    def state_name(state) -> str:
        if state == END:
            return END
        v, attack = state
        return f"v{v}" if attack is None else f"v{v}|a{attack[0]}_{attack[1]}"

    def block_of(state) -> str:
        return END if state == END else f"v{state[0]}"

    edges: List[List[int]] = [list(e) for e in graph.edges()]
    return GameBuilder(
        actions1=actions1,
        actions2=actions2,
        observations=["none", END],
        gamma=gamma,
        initial={(0, None): 1.0},
        step=step,
        reward=reward,
        state_name=state_name,
        block_of=block_of,
        metadata={
            "family": "patrolling",
            "vertices": vertices,
            "edge_prob": edge_prob,
            "attack_time": attack_time,
            "gamma": gamma,
            "seed": seed,
            "graph_seed": graph.graph.get("seed", seed),
            "edges": edges,
            "costs": cost.tolist(),
        },
    )


def gen_patrolling(
    vertices: int,
    edge_prob: Optional[float] = None,
    attack_time: int = 3,
    costs: Optional[Sequence[float]] = None,
    gamma: Optional[float] = None,
    seed: int = 0,
    graph: Optional[nx.Graph] = None,
) -> Game:
    """巡回ゲームを生成する（ブロック = 巡回者の頂点）"""
    return patrolling_builder(vertices, edge_prob, attack_time, costs, gamma, seed, graph).build()
