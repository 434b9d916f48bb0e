"""
Adaptive verification: build the overapproximated policy.

Starting from one cell covering the domain, cells are verified and split
until every leaf either has a single possible action or cannot be split any
further (all widths at or below the minimum cell size).
"""

import logging
import time
from dataclasses import asdict, dataclass
from enum import Enum
from typing import List, Optional, Sequence, Set, Tuple

import numpy as np

from .network import MAX_CORNER_DIM, Network
from .partition import Cell, PartitionTree
from .verifier import (
    DEFAULT_REFINE_DEPTH,
    IntervalVerifier,
    full_mask,
    mask_from_indices,
    mask_size,
)

logger = logging.getLogger(__name__)


class SplitStrategy(str, Enum):
    """How a cell with several possible actions is divided."""
    ALL = 'all'
    INFORMED = 'informed'


@dataclass
class VerifierStats:
    """Counters for one adaptive verification run."""
    verifier_calls: int = 0
    corner_eval_batches: int = 0
    leaves_total: int = 0
    leaves_singleton: int = 0
    leaves_multi: int = 0
    wall_time: float = 0.0

    def merge(self, other: 'VerifierStats') -> 'VerifierStats':
        """Combine counters from independent runs (order does not matter)."""
        return VerifierStats(**{k: v + getattr(other, k) for k, v in asdict(self).items()})

    def count_leaves(self, tree: PartitionTree) -> None:
        self.leaves_total = len(tree)
        self.leaves_singleton = sum(1 for c in tree.leaves.values() if mask_size(c.action_set) == 1)
        self.leaves_multi = self.leaves_total - self.leaves_singleton

    def to_dict(self) -> dict:
        return asdict(self)


def strategy_dims(corner_actions: Sequence[int], d: int) -> Set[int]:
    """
    Dimensions along which some pair of adjacent corners disagrees.

    Corners are indexed lexicographically (bit k of the index selects the upper
    bound of dimension k). The result is empty iff all corners agree.

    Raises:
        ValueError: If len(corner_actions) != 2**d
    """
    actions = np.asarray(corner_actions)
    if actions.shape != (1 << d,):
        raise ValueError(f"expected {1 << d} corner actions for d={d}, got {actions.shape[0]}")
    idx = np.arange(1 << d)
    dims = set()
    for k in range(d):
        low = idx[((idx >> k) & 1) == 0]
        if np.any(actions[low] != actions[low | (1 << k)]):
            dims.add(k)
    return dims


def _check_strategy(net: Network, strategy: SplitStrategy) -> SplitStrategy:
    strategy = SplitStrategy(strategy)
    if strategy is SplitStrategy.INFORMED and net.input_dim > MAX_CORNER_DIM:
        raise ValueError(
            f"informed split needs at most {MAX_CORNER_DIM} input dimensions; use all-split"
        )
    return strategy


def _check_min_size(net: Network, min_size: Sequence[float]) -> np.ndarray:
    min_size = np.asarray(min_size, dtype=np.float64)
    if min_size.shape != (net.input_dim,):
        raise ValueError(f"min_size needs {net.input_dim} entries, got {min_size.shape}")
    if np.any(min_size <= 0):
        raise ValueError("min_size entries must be strictly positive")
    return min_size


def refine(
    tree: PartitionTree,
    cells: List[Cell],
    verifier: IntervalVerifier,
    min_size: np.ndarray,
    strategy: SplitStrategy,
    stats: VerifierStats,
) -> None:
    """Run the verify-and-split loop on a stack of leaves of tree."""
    net = verifier.net
    everything = full_mask(net.output_dim)
    stack = list(cells)
    while stack:
        cell = stack.pop()
        candidates = cell.candidates or everything
        dims = cell.splittable_dims(min_size)

        if strategy is SplitStrategy.INFORMED and dims:
            corners = net.evaluate_corners(cell.lows, cell.highs)
            stats.corner_eval_batches += 1
            informed = sorted(strategy_dims(corners, cell.dim).intersection(dims))
            if informed:
                # Corners differ: several actions are possible, no call needed
                cell.candidates = candidates | mask_from_indices(corners)
                cell.action_set = 0
                stack.extend(tree[i] for i in tree.split(cell.id, informed))
                continue

        cell.action_set = verifier.possible_actions(cell.lows, cell.highs, candidates)
        if mask_size(cell.action_set) > 1 and dims:
            stack.extend(tree[i] for i in tree.split(cell.id, dims))


def adaptive_verify(
    net: Network,
    lows: Sequence[float],
    highs: Sequence[float],
    min_size: Sequence[float],
    strategy: SplitStrategy = SplitStrategy.INFORMED,
    depth: int = DEFAULT_REFINE_DEPTH,
    tree: Optional[PartitionTree] = None,
) -> Tuple[PartitionTree, VerifierStats]:
    """
    Partition the domain until each leaf is single-action or minimal.

    Args:
        net: Policy network
        lows, highs: Input domain (ignored when tree is given)
        min_size: Per-dimension minimum cell width
        strategy: All-split or informed split
        depth: Bisection depth of each verifier query
        tree: Existing partition whose leaves are refined instead of the domain

    Returns:
        (tree, stats) where every leaf carries a nonempty action_set
    """
    strategy = _check_strategy(net, strategy)
    min_size = _check_min_size(net, min_size)
    if tree is None:
        tree = PartitionTree(lows, highs)
    if tree.dim != net.input_dim:
        raise ValueError(f"domain has dimension {tree.dim}, network expects {net.input_dim}")

    start = time.perf_counter()
    verifier = IntervalVerifier(net, depth)
    stats = VerifierStats()
    logger.info("Adaptive verification (%s split) on %d starting cells",
                strategy.value, len(tree))
    refine(tree, list(tree.iter_leaves())[::-1], verifier, min_size, strategy, stats)

    stats.verifier_calls = verifier.calls
    stats.count_leaves(tree)
    stats.wall_time = time.perf_counter() - start
    logger.info("Adaptive verification done: %d leaves (%d multi-action), %d verifier calls",
                stats.leaves_total, stats.leaves_multi, stats.verifier_calls)
    return tree, stats


def uniform_verify(
    net: Network,
    lows: Sequence[float],
    highs: Sequence[float],
    min_size: Sequence[float],
    depth: int = DEFAULT_REFINE_DEPTH,
) -> Tuple[PartitionTree, VerifierStats]:
    """Verify every cell of a uniform minimum-size partition (non-adaptive baseline)."""
    min_size = _check_min_size(net, min_size)
    start = time.perf_counter()
    tree = PartitionTree.uniform(lows, highs, min_size)
    verifier = IntervalVerifier(net, depth)
    for cell in tree.iter_leaves():
        cell.action_set = verifier.possible_actions(cell.lows, cell.highs)
    stats = VerifierStats(verifier_calls=verifier.calls)
    stats.count_leaves(tree)
    stats.wall_time = time.perf_counter() - start
    return tree, stats


def reverify(verifier: IntervalVerifier, cell: Cell) -> int:
    """Recompute a split child's action set, checking only its inherited candidates."""
    cell.action_set = verifier.possible_actions(cell.lows, cell.highs, cell.candidates or None)
    return cell.action_set
