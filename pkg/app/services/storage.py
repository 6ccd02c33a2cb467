"""
ゲームファイル・境界ファイルの読み書き
数値は Python の float repr（最短の往復可能表記）で書き出すため、読み戻しは完全一致
"""
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
from pydantic import ValidationError

from app.config import SolverConfig
from app.exceptions import BoundsMismatch, InvalidGame
from app.models.schemas import (
    BlockBounds,
    BoundsFile,
    BoundsMeta,
    GameFile,
    Outcome,
    PartitionBlock,
    RewardEntry,
    SuccessorEntry,
    TransitionRow,
    UpsilonPoint,
)
from app.services.bounds import AlphaVector, LowerBound, UpperBound
from app.services.game import Game, utility_bounds, validate_game
from app.services.hsvi import SolveStats

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


# --- ゲームファイル ---

def game_to_file(game: Game) -> GameFile:
    """Game をファイル形式に戻す（単一ブロックなら partitions は省略）"""
    states, a1s, a2s, obs = game.states, game.actions1, game.actions2, game.observations
    transitions = [
        TransitionRow(
            s=states[s],
            a1=a1s[a1],
            a2=a2s[a2],
            out=[Outcome(o=obs[o], s2=states[s2], p=p) for o, s2, p in outcomes],
        )
        for (s, a1, a2), outcomes in sorted(game.transitions.items())
    ]
    rewards = [
        RewardEntry(s=states[s], a1=a1s[a1], a2=a2s[a2], r=float(game.rewards[s, a1, a2]))
        for s, a1, a2 in zip(*np.nonzero(game.rewards))
    ]
    partitions = None
    if len(game.blocks) > 1 or game.blocks[0].name != "all":
        partitions = [
            PartitionBlock(
                block=block.name,
                states=[states[s] for s in block.states],
                successors=[
                    SuccessorEntry(a1=a1s[a1], o=obs[o], block=game.blocks[target].name)
                    for (k, a1, o), target in sorted(game.successors.items())
                    if k == index
                ],
            )
            for index, block in enumerate(game.blocks)
        ]
    initial = game.initial_belief
    return GameFile(
        states=list(states),
        actions1=list(a1s),
        actions2=list(a2s),
        observations=list(obs),
        gamma=game.gamma,
        initial_belief={
            states[game.blocks[initial.block].states[i]]: float(p)
            for i, p in enumerate(initial.probs)
            if p > 0
        },
        partitions=partitions,
        transitions=transitions,
        rewards=rewards,
        metadata=dict(game.metadata),
    )


def _as_file(game: Union[Game, GameFile]) -> GameFile:
    return game if isinstance(game, GameFile) else game_to_file(game)


def canonical_json(raw: GameFile) -> str:
    data = raw.model_dump(mode="json", exclude={"metadata"})
    return json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def game_hash(game: Union[Game, GameFile]) -> str:
    """git の blob ハッシュと同じ形式の内容ハッシュ（metadata は含めない）"""
    body = canonical_json(_as_file(game)).encode("utf-8")
    return hashlib.sha1(b"blob %d\0" % len(body) + body).hexdigest()


def save_game(game: Union[Game, GameFile], path: PathLike) -> str:
    """ゲームを JSON で保存し、内容ハッシュを返す"""
    raw = _as_file(game)
    Path(path).write_text(
        json.dumps(raw.model_dump(mode="json"), ensure_ascii=False, indent=1), encoding="utf-8"
    )
    digest = game_hash(raw)
    logger.info(f"ゲームを保存しました: {path} (hash={digest[:12]})")
    return digest


def read_game_file(path: PathLike) -> GameFile:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise InvalidGame(f"ゲームファイルを読み込めません: {e}", {"path": str(path)}) from e
    try:
        return GameFile.model_validate_json(text)
    except ValidationError as e:
        raise InvalidGame(f"ゲームファイルの形式が不正です: {e.error_count()} errors", {"path": str(path)}) from e


def load_game(path: PathLike) -> Game:
    return validate_game(read_game_file(path))


# --- 境界ファイル ---

def bounds_to_file(
    game: Game,
    lb: LowerBound,
    ub: UpperBound,
    stats: SolveStats,
    config: Optional[SolverConfig] = None,
) -> BoundsFile:
    utility = utility_bounds(game)
    blocks: Dict[str, BlockBounds] = {}
    covered = set(lb.blocks) & set(ub.blocks)
    for k, block in enumerate(game.blocks):
        if k not in covered:
            continue
        beliefs, values = ub.points(k)
        blocks[block.name] = BlockBounds(
            states=[game.states[s] for s in block.states],
            gamma_set=lb.alphas(k).tolist(),
            upsilon_set=[UpsilonPoint(belief=b.tolist(), value=float(y)) for b, y in zip(beliefs, values)],
            initial_alpha=lb.initial_alpha(k).values.tolist(),
        )
    meta = BoundsMeta(
        gamma=game.gamma,
        delta=utility.delta,
        L=utility.L,
        U=utility.U,
        lower_value=stats.lower_value,
        upper_value=stats.upper_value,
        epsilon_target=stats.epsilon,
        epsilon_achieved=stats.final_gap,
        budget_exceeded=stats.budget_exceeded,
        config=config.to_dict() if config is not None else {},
        game_hash=game_hash(game),
    )
    return BoundsFile(meta=meta, blocks=blocks)


def save_bounds(
    path: PathLike,
    game: Game,
    lb: LowerBound,
    ub: UpperBound,
    stats: SolveStats,
    config: Optional[SolverConfig] = None,
) -> BoundsFile:
    bounds = bounds_to_file(game, lb, ub, stats, config)
    Path(path).write_text(
        json.dumps(bounds.model_dump(mode="json"), ensure_ascii=False, indent=1), encoding="utf-8"
    )
    logger.info(f"境界を保存しました: {path} (|Γ|={lb.size()}, |Υ|={ub.size()})")
    return bounds


def bounds_from_file(game: Game, bounds: BoundsFile, prune_growth: Optional[float] = None) -> Tuple[LowerBound, UpperBound]:
    """BoundsFile から境界を復元する。ゲームの内容ハッシュが異なれば BoundsMismatch"""
    digest = game_hash(game)
    if bounds.meta.game_hash != digest:
        raise BoundsMismatch(
            "境界ファイルのゲームハッシュが一致しません",
            {"expected": digest[:12], "found": bounds.meta.game_hash[:12]},
        )
    utility = utility_bounds(game)
    names = {block.name: k for k, block in enumerate(game.blocks)}
    initial: Dict[int, AlphaVector] = {}
    alphas: Dict[int, np.ndarray] = {}
    points: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}
    for name, entry in bounds.blocks.items():
        k = names.get(name)
        if k is None:
            raise BoundsMismatch("未知のブロックです", {"block": name})
        expected = [game.states[s] for s in game.blocks[k].states]
        if entry.states != expected:
            raise BoundsMismatch("ブロックの状態が一致しません", {"block": name})
        n = len(expected)
        rows = np.array(entry.gamma_set, dtype=float).reshape(-1, n)
        beliefs = np.array([p.belief for p in entry.upsilon_set], dtype=float).reshape(-1, n)
        values = np.array([p.value for p in entry.upsilon_set], dtype=float)
        if len(entry.initial_alpha) != n:
            raise BoundsMismatch("初期 α ベクトルの次元が一致しません", {"block": name})
        initial[k] = AlphaVector(k, np.array(entry.initial_alpha, dtype=float))
        alphas[k] = rows
        points[k] = (beliefs, values)

    lb = LowerBound.restore(utility, initial, alphas)
    growth = bounds.meta.config.get("prune_growth", 0.10) if prune_growth is None else prune_growth
    ub = UpperBound.from_points(utility, points, growth)
    return lb, ub


def load_bounds(path: PathLike, game: Game) -> Tuple[LowerBound, UpperBound, BoundsMeta]:
    try:
        bounds = BoundsFile.model_validate_json(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise BoundsMismatch(f"境界ファイルを読み込めません: {e}", {"path": str(path)}) from e
    except ValidationError as e:
        raise BoundsMismatch(f"境界ファイルの形式が不正です: {e.error_count()} errors", {"path": str(path)}) from e
    lb, ub = bounds_from_file(game, bounds)
    logger.info(f"境界を読み込みました: {path} (|Γ|={lb.size()}, |Υ|={ub.size()})")
    return lb, ub, bounds.meta


def summary(game: Game) -> Dict[str, Any]:
    """info コマンド用の要約"""
    info = game.describe()
    info["hash"] = game_hash(game)
    info["block_sizes"] = {block.name: len(block.states) for block in game.blocks}
    info["family"] = game.metadata.get("family")
    return info
