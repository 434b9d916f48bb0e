"""Continuum gridworld: a point robot on a square field with a pit and a goal."""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..exceptions import UnknownActionError
from ..partition import box_intersects
from .base import AffineOutcome, DynamicsModel, point_in_box

logger = logging.getLogger(__name__)

DIRECTIONS = {
    'up': (0.0, 1.0),
    'down': (0.0, -1.0),
    'left': (-1.0, 0.0),
    'right': (1.0, 0.0),
}
ACTIONS = tuple(DIRECTIONS)

Box = Tuple[Sequence[float], Sequence[float]]


class ContinuumWorld(DynamicsModel):
    """
    Square world [0, size]^2 with four moves.

    Each action moves `step` units in the intended direction with probability
    `p_intended` and in each other direction with the remaining probability
    split evenly. Leaving the field is handled by the boundary policy (walls
    by default).

    Example:
        >>> world = ContinuumWorld()
        >>> [round(o.probability, 12) for o in world.outcomes([5, 5], [7.5, 7.5], 0, 0)]
        [0.7, 0.1, 0.1, 0.1]
    """

    state_labels = ('x', 'y')
    action_labels = ACTIONS

    def __init__(
        self,
        size: float = 20.0,
        pit: Optional[Box] = ((8.0, 8.0), (12.0, 12.0)),
        goal: Optional[Box] = ((19.0, 19.0), (20.0, 20.0)),
        step: float = 1.0,
        p_intended: float = 0.7,
        boundary: str = 'clamp',
    ) -> None:
        super().__init__((0.0, 0.0), (size, size), boundary)
        if not 0.0 <= p_intended <= 1.0:
            raise ValueError(f"p_intended must lie in [0, 1], got {p_intended}")
        if step <= 0:
            raise ValueError("step must be positive")
        self.size = float(size)
        self.step = float(step)
        self.p_intended = float(p_intended)
        self.pit = self._box(pit, 'pit')
        self.goal = self._box(goal, 'goal')
        self._tables = [self._table(a) for a in range(len(ACTIONS))]

    @staticmethod
    def _box(box: Optional[Box], name: str):
        if box is None:
            return None
        lows = np.asarray(box[0], dtype=np.float64)
        highs = np.asarray(box[1], dtype=np.float64)
        if lows.shape != (2,) or highs.shape != (2,) or np.any(lows >= highs):
            raise ValueError(f"{name} must be a 2-D box with lows below highs")
        return lows, highs

    def _table(self, action: int) -> List[AffineOutcome]:
        p_other = (1.0 - self.p_intended) / (len(ACTIONS) - 1)
        identity = np.eye(2)
        table = []
        for k, name in enumerate(ACTIONS):
            prob = self.p_intended if k == action else p_other
            offset = self.step * np.asarray(DIRECTIONS[name])
            table.append(AffineOutcome(prob, identity, offset, 0))
        # Intended move first
        table.insert(0, table.pop(action))
        return table

    def affine_outcomes(self, mode: int, action: int) -> List[AffineOutcome]:
        return self._tables[action]

    def unsafe(self, lows, highs) -> bool:
        if self.pit is None:
            return False
        return box_intersects(np.asarray(lows, dtype=np.float64),
                              np.asarray(highs, dtype=np.float64), *self.pit)

    def inside_unsafe(self, lows, highs) -> bool:
        if self.pit is None:
            return False
        return bool(np.all(np.asarray(lows) >= self.pit[0]) and np.all(np.asarray(highs) <= self.pit[1]))

    def absorbing_safe(self, lows, highs) -> bool:
        if self.goal is None:
            return False
        inside = np.all(np.asarray(lows) >= self.goal[0]) and np.all(np.asarray(highs) <= self.goal[1])
        return bool(inside) and not self.unsafe(lows, highs)

    def point_unsafe(self, x) -> bool:
        if self.pit is None:
            return False
        return point_in_box(np.asarray(x, dtype=np.float64), *self.pit, self.highs)

    def point_absorbing(self, x) -> bool:
        if self.goal is None:
            return False
        x = np.asarray(x, dtype=np.float64)
        return point_in_box(x, *self.goal, self.highs) and not self.point_unsafe(x)

    def point_unsafe_batch(self, states: np.ndarray) -> np.ndarray:
        if self.pit is None:
            return np.zeros(len(states), dtype=bool)
        return _in_box_batch(states, *self.pit, self.highs)

    def point_absorbing_batch(self, states: np.ndarray) -> np.ndarray:
        if self.goal is None:
            return np.zeros(len(states), dtype=bool)
        return _in_box_batch(states, *self.goal, self.highs) & ~self.point_unsafe_batch(states)

    def describe(self) -> dict:
        info = super().describe()
        info.update(
            size=self.size,
            step=self.step,
            p_intended=self.p_intended,
            pit=None if self.pit is None else [b.tolist() for b in self.pit],
            goal=None if self.goal is None else [b.tolist() for b in self.goal],
        )
        return info


def _in_box_batch(states, lows, highs, domain_highs) -> np.ndarray:
    states = np.asarray(states, dtype=np.float64)
    upper = (states < highs) | ((states == highs) & (highs == domain_highs))
    return np.all(states >= lows, axis=1) & np.all(upper, axis=1)


def continuum_outcomes(world: ContinuumWorld, lows, highs, action) -> list:
    """Outcome images of a cell; action may be an index or a direction label."""
    if isinstance(action, str):
        if action not in DIRECTIONS:
            raise UnknownActionError(f"unknown continuum action {action!r}")
        action = ACTIONS.index(action)
    return world.outcomes(lows, highs, 0, action)
