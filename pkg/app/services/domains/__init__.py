"""
ベンチマークドメインの生成器
"""
from typing import Any, Callable, Dict

from app.exceptions import GeneratorError
from app.services.domains.patrolling import gen_patrolling
from app.services.domains.pennies import gen_matching_pennies
from app.services.domains.pursuit import gen_pursuit
from app.services.domains.random_game import gen_random, gen_tiger
from app.services.domains.search import gen_search
from app.services.game import Game

GENERATORS: Dict[str, Callable[..., Game]] = {
    "pursuit": gen_pursuit,
    "search": gen_search,
    "patrolling": gen_patrolling,
    "pennies": gen_matching_pennies,
    "random": gen_random,
    "tiger": gen_tiger,
}


def generate(family: str, **params: Any) -> Game:
    """ファミリー名とパラメータからゲームを生成する"""
    generator = GENERATORS.get(family)
    if generator is None:
        raise GeneratorError("不明なドメインです", {"family": family, "choices": sorted(GENERATORS)})
    try:
        return generator(**params)
    except TypeError as e:
        raise GeneratorError(f"パラメータが不正です: {e}", {"family": family}) from e


__all__ = [
    "GENERATORS",
    "generate",
    "gen_matching_pennies",
    "gen_patrolling",
    "gen_pursuit",
    "gen_random",
    "gen_search",
    "gen_tiger",
]
