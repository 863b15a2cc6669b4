"""Environment ids and construction."""

from functools import partial
from typing import Callable, Dict, List

from .bandit import CodewordBanditEnv
from .base import HybridEnv
from .catch_point import CatchPointEnv
from .goal import GoalEnv
from .hard_move import HardMoveEnv
from .platform import PlatformEnv

_FACTORIES: Dict[str, Callable[[], HybridEnv]] = {}
for _n in (4, 6, 8, 10):
    _FACTORIES[f"hard_move_n{_n}"] = partial(HardMoveEnv, _n)
    _FACTORIES[f"hard_move_n{_n}_single_step"] = partial(
        HardMoveEnv, _n, single_step=True
    )
_FACTORIES["catch_point"] = CatchPointEnv
_FACTORIES["codeword_bandit"] = CodewordBanditEnv
_FACTORIES["goal"] = partial(GoalEnv, 2)
_FACTORIES["hard_goal"] = partial(GoalEnv, 10)
_FACTORIES["platform"] = PlatformEnv


def available() -> List[str]:
    """Sorted list of registered env ids."""
    return sorted(_FACTORIES)


def make(env_id: str) -> HybridEnv:
    """Construct a fresh environment by id."""
    try:
        factory = _FACTORIES[env_id]
    except KeyError:
        raise ValueError(
            f"Unknown env id {env_id!r}; available: {', '.join(available())}"
        ) from None
    return factory()
