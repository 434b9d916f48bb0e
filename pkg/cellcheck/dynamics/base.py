"""
Contract shared by the stochastic transition models.

A model has finitely many outcomes per (mode, action). Each outcome is an
affine map x' = A x + c applied with some probability, optionally switching
the discrete mode (e.g. the previous advisory). Image boxes are the exact
interval image of a cell under that map, then fitted to the domain according
to the boundary policy.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from ..exceptions import ModelError, UnknownActionError

logger = logging.getLogger(__name__)

BOUNDARY_POLICIES = ('clamp', 'safe')

PROBABILITY_TOLERANCE = 1e-12

EPS = np.finfo(np.float64).eps


class AffineOutcome(NamedTuple):
    """One stochastic outcome before it is applied to a cell."""
    probability: float
    matrix: np.ndarray
    offset: np.ndarray
    next_mode: int


@dataclass(frozen=True, eq=False)
class TransitionOutcome:
    """
    Image of a cell under one outcome.

    Attributes:
        probability: Outcome probability p_i
        lows, highs: Image box, a superset of every successor of the cell
        mode: Successor mode
        escaped: Part of the image left the domain (boundary policy 'safe')
    """
    probability: float
    lows: np.ndarray
    highs: np.ndarray
    mode: int = 0
    escaped: bool = False


def interval_image(matrix: np.ndarray, offset: np.ndarray,
                   lows: np.ndarray, highs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Componentwise range of x -> matrix @ x + offset over a box.

    Rows with a single nonzero coefficient are exact. Rows that sum several
    terms are widened by a rounding bound, so point successors computed in
    any summation order stay inside.
    """
    pos = np.maximum(matrix, 0.0)
    neg = np.minimum(matrix, 0.0)
    img_lo = pos @ lows + neg @ highs + offset
    img_hi = pos @ highs + neg @ lows + offset
    terms = np.count_nonzero(matrix, axis=1)
    mixed = terms > 1
    if np.any(mixed):
        magnitude = np.abs(matrix) @ np.maximum(np.abs(lows), np.abs(highs)) + np.abs(offset)
        pad = np.where(mixed, 2.0 * (terms + 2) * EPS * magnitude, 0.0)
        img_lo = np.where(mixed, np.nextafter(img_lo - pad, -np.inf), img_lo)
        img_hi = np.where(mixed, np.nextafter(img_hi + pad, np.inf), img_hi)
    return img_lo, img_hi


def point_in_box(x: np.ndarray, lows: np.ndarray, highs: np.ndarray,
                 domain_highs: np.ndarray) -> bool:
    """Half-open membership, closed on faces shared with the domain's upper faces."""
    upper = (x < highs) | ((x == highs) & (highs == domain_highs))
    return bool(np.all(x >= lows) and np.all(upper))


class DynamicsModel(ABC):
    """
    Stochastic dynamics over a box-shaped state domain with discrete modes.

    Subclasses provide the affine outcome table and the unsafe / absorbing
    predicates at cell and point level; everything else is derived here.
    """

    #: Names of the continuous state coordinates (network input order)
    state_labels: Tuple[str, ...] = ()
    #: Action labels, in network output order
    action_labels: Tuple[str, ...] = ()
    #: Discrete mode labels (a single mode for mode-free models)
    mode_labels: Tuple[str, ...] = ('default',)

    def __init__(self, lows: Sequence[float], highs: Sequence[float],
                 boundary: str = 'clamp') -> None:
        if boundary not in BOUNDARY_POLICIES:
            raise ValueError(f"boundary policy must be one of {BOUNDARY_POLICIES}, got {boundary!r}")
        self.lows = np.asarray(lows, dtype=np.float64)
        self.highs = np.asarray(highs, dtype=np.float64)
        if self.lows.shape != self.highs.shape or np.any(self.lows >= self.highs):
            raise ValueError("model domain must have lows strictly below highs")
        self.boundary = boundary

    @property
    def state_dim(self) -> int:
        return self.lows.shape[0]

    @property
    def num_actions(self) -> int:
        return len(self.action_labels)

    @property
    def num_modes(self) -> int:
        return len(self.mode_labels)

    # ==================== Model definition ====================

    @abstractmethod
    def affine_outcomes(self, mode: int, action: int) -> List[AffineOutcome]:
        """Outcome table for taking action in mode."""

    @abstractmethod
    def unsafe(self, lows: np.ndarray, highs: np.ndarray) -> bool:
        """True iff the cell overlaps the unsafe set."""

    @abstractmethod
    def absorbing_safe(self, lows: np.ndarray, highs: np.ndarray) -> bool:
        """True iff every state of the cell is an absorbing safe state."""

    def inside_unsafe(self, lows: np.ndarray, highs: np.ndarray) -> bool:
        """True iff the whole cell lies in the unsafe set (False when unknown)."""
        return False

    @abstractmethod
    def point_unsafe(self, x: np.ndarray) -> bool:
        """True iff the state lies in the unsafe set."""

    @abstractmethod
    def point_absorbing(self, x: np.ndarray) -> bool:
        """True iff the state is an absorbing safe state."""

    # ==================== Derived operations ====================

    def check_action(self, action: int) -> int:
        if not 0 <= int(action) < self.num_actions:
            raise UnknownActionError(
                f"action {action} outside 0..{self.num_actions - 1} for {type(self).__name__}"
            )
        return int(action)

    def mode_index(self, label: str) -> int:
        try:
            return self.mode_labels.index(label)
        except ValueError:
            raise ModelError(f"{label!r} is not a mode of {type(self).__name__}") from None

    def check_mode(self, mode: int) -> int:
        if not 0 <= int(mode) < self.num_modes:
            raise ModelError(f"mode {mode} outside 0..{self.num_modes - 1}")
        return int(mode)

    def _fit(self, lows: np.ndarray, highs: np.ndarray) -> Optional[Tuple[np.ndarray, np.ndarray, bool]]:
        inside = bool(np.all(lows >= self.lows) and np.all(highs <= self.highs))
        if inside:
            return lows, highs, False
        if self.boundary == 'clamp':
            return (np.clip(lows, self.lows, self.highs),
                    np.clip(highs, self.lows, self.highs), False)
        lo = np.maximum(lows, self.lows)
        hi = np.minimum(highs, self.highs)
        if np.any(lo > hi):
            return None
        return lo, hi, True

    def outcomes(self, lows: Sequence[float], highs: Sequence[float],
                 mode: int, action: int) -> List[TransitionOutcome]:
        """
        Outcome images of a cell for one action.

        Under the 'safe' boundary policy, outcomes that leave the domain
        entirely are dropped (their probability counts as safe).
        """
        mode = self.check_mode(mode)
        action = self.check_action(action)
        lows = np.asarray(lows, dtype=np.float64)
        highs = np.asarray(highs, dtype=np.float64)
        result = []
        for out in self.affine_outcomes(mode, action):
            img_lo, img_hi = interval_image(out.matrix, out.offset, lows, highs)
            fitted = self._fit(img_lo, img_hi)
            if fitted is None:
                continue
            lo, hi, escaped = fitted
            result.append(TransitionOutcome(out.probability, lo, hi, out.next_mode, escaped))
        return result

    def point_outcomes(self, x: Sequence[float], mode: int,
                       action: int) -> List[Tuple[float, Optional[np.ndarray], int]]:
        """
        Successors of a single state: (probability, next state, next mode).

        The next state is None when the successor leaves the domain under the
        'safe' boundary policy.
        """
        mode = self.check_mode(mode)
        action = self.check_action(action)
        x = np.asarray(x, dtype=np.float64)
        result = []
        for out in self.affine_outcomes(mode, action):
            nxt = out.matrix @ x + out.offset
            if np.all(nxt >= self.lows) and np.all(nxt <= self.highs):
                result.append((out.probability, nxt, out.next_mode))
            elif self.boundary == 'clamp':
                result.append((out.probability, np.clip(nxt, self.lows, self.highs), out.next_mode))
            else:
                result.append((out.probability, None, out.next_mode))
        return result

    def _fit_points(self, states: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        outside = np.any((states < self.lows) | (states > self.highs), axis=1)
        if self.boundary == 'clamp':
            return np.clip(states, self.lows, self.highs), np.zeros(states.shape[0], dtype=bool)
        return states, outside

    def successors_batch(self, states: np.ndarray, mode: int,
                         action: int) -> List[Tuple[float, np.ndarray, int, np.ndarray]]:
        """
        Successors of many states under every outcome of one (mode, action).

        Returns:
            [(probability, next states, next mode, escaped mask), ...]
        """
        states = np.asarray(states, dtype=np.float64)
        result = []
        for out in self.affine_outcomes(self.check_mode(mode), self.check_action(action)):
            nxt, escaped = self._fit_points(states @ out.matrix.T + out.offset)
            result.append((out.probability, nxt, out.next_mode, escaped))
        return result

    def sample_step(self, states: np.ndarray, modes: np.ndarray, actions: np.ndarray,
                    rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Sample one transition for a batch of states.

        Returns:
            (next states, next modes, escaped mask)
        """
        states = np.asarray(states, dtype=np.float64)
        next_states = states.copy()
        modes = np.asarray(modes)
        actions = np.asarray(actions)
        next_modes = modes.copy()
        u = rng.random(states.shape[0])

        pairs = np.unique(np.stack([modes, actions], axis=1), axis=0)
        for mode, action in pairs:
            rows = np.flatnonzero((modes == mode) & (actions == action))
            table = self.affine_outcomes(self.check_mode(mode), self.check_action(action))
            cum = np.cumsum([o.probability for o in table])
            pick = np.minimum(np.searchsorted(cum, u[rows], side='right'), len(table) - 1)
            for k, out in enumerate(table):
                sel = rows[pick == k]
                if sel.size == 0:
                    continue
                next_states[sel] = states[sel] @ out.matrix.T + out.offset
                next_modes[sel] = out.next_mode

        next_states, escaped = self._fit_points(next_states)
        return next_states, next_modes, escaped

    def point_unsafe_batch(self, states: np.ndarray) -> np.ndarray:
        return np.array([self.point_unsafe(x) for x in states], dtype=bool)

    def point_absorbing_batch(self, states: np.ndarray) -> np.ndarray:
        return np.array([self.point_absorbing(x) for x in states], dtype=bool)

    def probability_sums(self) -> np.ndarray:
        """Total outcome probability for every (mode, action) pair."""
        return np.array([
            [sum(o.probability for o in self.affine_outcomes(m, a))
             for a in range(self.num_actions)]
            for m in range(self.num_modes)
        ])

    def describe(self) -> dict:
        """Parameters recorded in run manifests and export headers."""
        return {
            'model': type(self).__name__,
            'state_labels': list(self.state_labels),
            'action_labels': list(self.action_labels),
            'mode_labels': list(self.mode_labels),
            'lows': self.lows.tolist(),
            'highs': self.highs.tolist(),
            'boundary': self.boundary,
        }
