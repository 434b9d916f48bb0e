"""
VerticalCAS vertical-plane encounter model.

State coordinates (h, vown, vint, tau): relative intruder altitude (ft),
ownship and intruder vertical rates (ft/s), and time to loss of horizontal
separation (s). The previous advisory is the discrete mode. One step lasts
one second:

    h'    = h - vown + vint + 0.5 * (aint - aown)
    vown' = vown + aown
    vint' = vint + aint
    tau'  = tau - 1

The ownship acceleration is drawn from the row of its previous advisory,
the intruder acceleration uniformly from (-g/8, 0, g/8).
"""

import logging
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..exceptions import ModelError, UnknownActionError
from .base import AffineOutcome, DynamicsModel

logger = logging.getLogger(__name__)

# CONSTANTS
G = 32.2            # ft/s^2
NMAC_HEIGHT = 100.0  # ft

STATE_LABELS = ('h', 'vown', 'vint', 'tau')
H, VOWN, VINT, TAU = range(4)

ADVISORIES = (
    'COC',       # clear of conflict
    'DNC',       # do not climb
    'DND',       # do not descend
    'DES1500',   # descend at least 1500 ft/min
    'CL1500',    # climb at least 1500 ft/min
    'SDES1500',  # strengthen descent to at least 1500 ft/min
    'SCL1500',   # strengthen climb to at least 1500 ft/min
    'SDES2500',  # strengthen descent to at least 2500 ft/min
    'SCL2500',   # strengthen climb to at least 2500 ft/min
)

# Previous advisory -> (probabilities, ownship accelerations in units of g)
OWNSHIP_RESPONSE: Dict[str, Tuple[Tuple[float, ...], Tuple[float, ...]]] = {
    'COC': ((0.34, 0.33, 0.33), (0.0, -1 / 3, 1 / 3)),
    'DNC': ((0.5, 0.3, 0.2), (-1 / 3, -1 / 2, 1 / 3)),
    'DND': ((0.5, 0.3, 0.2), (1 / 3, 1 / 2, -1 / 3)),
    'DES1500': ((0.5, 0.3, 0.2), (-1 / 3, -1 / 2, 1 / 3)),
    'CL1500': ((0.5, 0.3, 0.2), (1 / 3, 1 / 2, -1 / 3)),
    'SDES1500': ((0.5, 0.3, 0.2), (-1 / 2.5, -1 / 2, 1 / 3)),
    'SCL1500': ((0.5, 0.3, 0.2), (1 / 2.5, 1 / 2, -1 / 3)),
    'SDES2500': ((0.5, 0.3, 0.2), (-1 / 2.5, -1 / 2, 1 / 3)),
    'SCL2500': ((0.5, 0.3, 0.2), (1 / 2.5, 1 / 2, -1 / 3)),
}

# Intruder: (probabilities, accelerations in units of g)
INTRUDER_RESPONSE = ((1 / 3, 1 / 3, 1 / 3), (-1 / 8, 0.0, 1 / 8))

DEFAULT_RANGES = {
    'h': (-8000.0, 8000.0),
    'vown': (-100.0, 100.0),
    'vint': (-100.0, 100.0),
    'tau': (0.0, 40.0),
}


def step_matrix() -> np.ndarray:
    """Linear part of the one-second update over (h, vown, vint, tau)."""
    return np.array([
        [1.0, -1.0, 1.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ])


def step_offset(a_own: float, a_int: float) -> np.ndarray:
    return np.array([0.5 * (a_int - a_own), a_own, a_int, -1.0])


class VcasModel(DynamicsModel):
    """
    Stochastic VerticalCAS dynamics over a slice of (h, vown, vint, tau).

    Args:
        fixed: Vertical rates held constant, e.g. {'vown': 0.0, 'vint': 0.0};
            the remaining coordinates are the state (and network inputs) in
            the order (h, vown, vint, tau)
        ranges: Per-coordinate domain overrides (defaults: h +-8000 ft,
            rates +-100 ft/s, tau 0..40 s)
        modes: Previous advisories that are tracked as modes (default all)
        g: Gravitational acceleration
        nmac_height: Vertical separation below which tau < 1 is a collision
        boundary: 'clamp' or 'safe'
    """

    action_labels = ADVISORIES

    def __init__(
        self,
        fixed: Optional[Mapping[str, float]] = None,
        ranges: Optional[Mapping[str, Sequence[float]]] = None,
        modes: Optional[Sequence[str]] = None,
        g: float = G,
        nmac_height: float = NMAC_HEIGHT,
        boundary: str = 'clamp',
    ) -> None:
        fixed = dict(fixed or {})
        for name in fixed:
            if name not in ('vown', 'vint'):
                raise ModelError(f"only vown and vint may be held fixed, not {name!r}")
        merged = dict(DEFAULT_RANGES)
        for name, bounds in (ranges or {}).items():
            if name not in merged:
                raise ModelError(f"unknown state coordinate {name!r}")
            merged[name] = (float(bounds[0]), float(bounds[1]))

        self.fixed = {k: float(v) for k, v in fixed.items()}
        self.free = [i for i, name in enumerate(STATE_LABELS) if name not in self.fixed]
        self.state_labels = tuple(STATE_LABELS[i] for i in self.free)
        super().__init__([merged[STATE_LABELS[i]][0] for i in self.free],
                         [merged[STATE_LABELS[i]][1] for i in self.free], boundary)

        modes = tuple(modes) if modes else ADVISORIES
        for name in modes:
            if name not in OWNSHIP_RESPONSE:
                raise UnknownActionError(f"unknown advisory {name!r}")
        self.mode_labels = modes
        self.g = float(g)
        self.nmac_height = float(nmac_height)
        self.h_index = self.state_labels.index('h')
        self.tau_index = self.state_labels.index('tau')
        self._tables: Dict[Tuple[int, int], List[AffineOutcome]] = {}

        held = [i for i in range(4) if i not in self.free]
        full = step_matrix()
        self._matrix = full[np.ix_(self.free, self.free)]
        self._carry = full[np.ix_(self.free, held)]
        self._held_values = np.array([self.fixed[STATE_LABELS[i]] for i in held])

    def affine_outcomes(self, mode: int, action: int) -> List[AffineOutcome]:
        key = (mode, action)
        if key not in self._tables:
            next_mode = self.mode_index(ADVISORIES[action])
            own_p, own_a = OWNSHIP_RESPONSE[self.mode_labels[mode]]
            int_p, int_a = INTRUDER_RESPONSE
            table = []
            for p0, a0 in zip(own_p, own_a):
                for p1, a1 in zip(int_p, int_a):
                    full = step_offset(a0 * self.g, a1 * self.g)
                    offset = full[self.free] + self._carry @ self._held_values
                    table.append(AffineOutcome(p0 * p1, self._matrix, offset, next_mode))
            self._tables[key] = table
        return self._tables[key]

    # ==================== Unsafe and terminal sets ====================

    def _below(self, lows, highs, i: int, bound: float) -> bool:
        """True iff coordinate i stays strictly below bound everywhere in the cell."""
        if highs[i] < bound:
            return True
        # A face at bound belongs to the cell when the cell is flat there or it is the domain top
        return bool(highs[i] == bound and lows[i] < highs[i] and highs[i] < self.highs[i])

    def unsafe(self, lows, highs) -> bool:
        h, t = self.h_index, self.tau_index
        return bool(lows[t] < 1.0 and lows[h] < self.nmac_height and highs[h] > -self.nmac_height)

    def inside_unsafe(self, lows, highs) -> bool:
        h = self.h_index
        return (self._below(lows, highs, self.tau_index, 1.0)
                and bool(lows[h] > -self.nmac_height)
                and self._below(lows, highs, h, self.nmac_height))

    def absorbing_safe(self, lows, highs) -> bool:
        return self._below(lows, highs, self.tau_index, 1.0) and not self.unsafe(lows, highs)

    def point_unsafe(self, x) -> bool:
        return bool(x[self.tau_index] < 1.0 and abs(x[self.h_index]) < self.nmac_height)

    def point_absorbing(self, x) -> bool:
        return bool(x[self.tau_index] < 1.0) and not self.point_unsafe(x)

    def point_unsafe_batch(self, states: np.ndarray) -> np.ndarray:
        states = np.asarray(states, dtype=np.float64)
        return ((states[:, self.tau_index] < 1.0)
                & (np.abs(states[:, self.h_index]) < self.nmac_height))

    def point_absorbing_batch(self, states: np.ndarray) -> np.ndarray:
        states = np.asarray(states, dtype=np.float64)
        return (states[:, self.tau_index] < 1.0) & ~self.point_unsafe_batch(states)

    def describe(self) -> dict:
        info = super().describe()
        info.update(fixed=self.fixed, g=self.g, nmac_height=self.nmac_height)
        return info


def vcas_outcomes(model: VcasModel, lows, highs, previous: str, advisory: str):
    """Outcome images of a cell for advisory labels (previous, current)."""
    if advisory not in ADVISORIES:
        raise UnknownActionError(f"unknown advisory {advisory!r}")
    return model.outcomes(lows, highs, model.mode_index(previous), ADVISORIES.index(advisory))


def vcas_unsafe(model: VcasModel, lows, highs) -> bool:
    return model.unsafe(np.asarray(lows, dtype=np.float64), np.asarray(highs, dtype=np.float64))
