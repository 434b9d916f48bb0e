"""
Sound interval bound propagation for ReLU networks.

Given a box of inputs, propagate_bounds returns per-output intervals that
contain the network's scores at every point of the box. possible_actions turns
those intervals into a superset of the actions the network can select inside
the box, tightening it by bounded-depth bisection along the widest dimension.

Action sets are plain integer bitmasks: bit i set means action i is possible.
"""

import logging
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .exceptions import DimensionError
from .network import Network

logger = logging.getLogger(__name__)

DEFAULT_REFINE_DEPTH = 4

# Outward padding per layer, relative to the sum of absolute terms of each
# affine output; covers floating-point rounding of the point-wise forward pass.
ROUNDING_PAD = 1e-12


# ==================== Action sets ====================

def full_mask(n: int) -> int:
    """Mask with the first n actions set."""
    return (1 << n) - 1


def mask_from_indices(indices: Iterable[int]) -> int:
    mask = 0
    for i in indices:
        mask |= 1 << int(i)
    return mask


def indices_from_mask(mask: int) -> List[int]:
    out = []
    i = 0
    while mask >> i:
        if (mask >> i) & 1:
            out.append(i)
        i += 1
    return out


def mask_size(mask: int) -> int:
    return bin(mask).count('1')


def mask_labels(mask: int, labels: Sequence[str]) -> List[str]:
    return [labels[i] for i in indices_from_mask(mask)]


# ==================== Bounds ====================

@dataclass(frozen=True, eq=False)
class IntervalVector:
    """Per-component closed intervals [lows[i], highs[i]]."""
    lows: np.ndarray
    highs: np.ndarray

    def __post_init__(self) -> None:
        lows = np.asarray(self.lows, dtype=np.float64)
        highs = np.asarray(self.highs, dtype=np.float64)
        if lows.shape != highs.shape:
            raise ValueError("lows and highs must have the same shape")
        if not (np.all(np.isfinite(lows)) and np.all(np.isfinite(highs))):
            raise ValueError("interval bounds must be finite")
        if np.any(lows > highs):
            raise ValueError("interval lows must not exceed highs")
        object.__setattr__(self, 'lows', lows)
        object.__setattr__(self, 'highs', highs)

    def __len__(self) -> int:
        return self.lows.shape[0]

    def contains(self, values: Sequence[float]) -> bool:
        v = np.asarray(values, dtype=np.float64)
        return bool(np.all(v >= self.lows) and np.all(v <= self.highs))

    def contains_interval(self, other: 'IntervalVector') -> bool:
        return bool(np.all(other.lows >= self.lows) and np.all(other.highs <= self.highs))


def _pad(w: np.ndarray, b: np.ndarray, in_lo: np.ndarray, in_hi: np.ndarray,
         lo: np.ndarray, hi: np.ndarray):
    terms = np.abs(w) @ np.maximum(np.abs(in_lo), np.abs(in_hi)) + np.abs(b)
    scale = ROUNDING_PAD * (1.0 + terms)
    return lo - scale, hi + scale


def propagate_bounds(net: Network, lows: Sequence[float], highs: Sequence[float]) -> IntervalVector:
    """
    Output bounds of net over the box [lows, highs].

    Each affine layer maps the box through the positive and negative parts of
    its weight matrix; ReLU clips both ends at zero.

    Raises:
        DimensionError: If the box dimension differs from the input dimension
    """
    lo = np.asarray(lows, dtype=np.float64)
    hi = np.asarray(highs, dtype=np.float64)
    if lo.shape != (net.input_dim,) or hi.shape != (net.input_dim,):
        raise DimensionError(
            f"cell has dimension {lo.shape[0] if lo.ndim else 0}, network expects {net.input_dim}"
        )

    last = net.num_layers - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        w_pos = np.maximum(w, 0.0)
        w_neg = np.minimum(w, 0.0)
        out_lo, out_hi = w_pos @ lo + w_neg @ hi + b, w_pos @ hi + w_neg @ lo + b
        lo, hi = _pad(w, b, lo, hi, out_lo, out_hi)
        if k < last:
            lo = np.maximum(lo, 0.0)
            hi = np.maximum(hi, 0.0)
    return IntervalVector(lo, hi)


def undominated(net: Network, bounds: IntervalVector, candidates: int) -> int:
    """
    Candidate actions that no other output strictly dominates.

    Under argmax, action i is dropped when highs[i] < lows[j] for some j;
    under argmin when lows[i] > highs[j]. Exact ties keep both actions.
    """
    if net.selection_rule == 'argmax':
        threshold = float(np.max(bounds.lows))
        keep = bounds.highs >= threshold
    else:
        threshold = float(np.min(bounds.highs))
        keep = bounds.lows <= threshold
    return candidates & mask_from_indices(np.flatnonzero(keep))


def possible_actions(
    net: Network,
    lows: Sequence[float],
    highs: Sequence[float],
    candidates: Optional[int] = None,
    depth: int = DEFAULT_REFINE_DEPTH,
) -> int:
    """
    Superset of the actions net can select anywhere in the box.

    Args:
        net: Network to verify
        lows, highs: Box bounds
        candidates: Mask of actions still possible in an enclosing cell;
            actions outside it are skipped (default: all actions)
        depth: Maximum bisection depth used to tighten the set

    Returns:
        Nonempty action bitmask
    """
    if candidates is None:
        candidates = full_mask(net.output_dim)
    lo = np.asarray(lows, dtype=np.float64)
    hi = np.asarray(highs, dtype=np.float64)
    mask = undominated(net, propagate_bounds(net, lo, hi), candidates)

    if mask_size(mask) > 1 and depth > 0:
        widths = hi - lo
        dim = int(np.argmax(widths))
        if widths[dim] > 0:
            mid = 0.5 * (lo[dim] + hi[dim])
            left_hi = hi.copy()
            left_hi[dim] = mid
            right_lo = lo.copy()
            right_lo[dim] = mid
            mask = (possible_actions(net, lo, left_hi, mask, depth - 1)
                    | possible_actions(net, right_lo, hi, mask, depth - 1))

    if mask == 0:
        # Only reachable when the candidate mask excludes the true winner.
        logger.warning("Candidate mask %s excludes every undominated action", bin(candidates))
        return candidates
    return mask


class IntervalVerifier:
    """
    Verification tool bound to one network, counting its calls.

    Example:
        >>> verifier = IntervalVerifier(net)
        >>> mask = verifier.possible_actions([0, 0], [1, 1])
        >>> verifier.calls
        1
    """

    def __init__(self, net: Network, depth: int = DEFAULT_REFINE_DEPTH) -> None:
        if depth < 0:
            raise ValueError("refinement depth must be >= 0")
        self.net = net
        self.depth = depth
        self.calls = 0

    def possible_actions(self, lows, highs, candidates: Optional[int] = None) -> int:
        self.calls += 1
        return possible_actions(self.net, lows, highs, candidates, self.depth)
