"""
Splitting-tree partition of the controller input space.

Cells are axis-aligned, half-open boxes [low, high) except on the domain's
upper faces, which are closed. A split bisects a leaf at the midpoints of a
set of dimensions, replacing it by 2**k children. Leaves always tile the root.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import (
    DegenerateSplitError,
    DomainError,
    EmptySplitError,
    NotALeafError,
    PartitionError,
)

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class Cell:
    """
    One node of the partition tree; leaves are the active cells.

    Attributes:
        id: Stable identifier, unique within its tree
        lows, highs: Per-dimension bounds
        action_set: Bitmask of possibly selected actions (0 until verified)
        candidates: Mask inherited from the parent, used to restrict reverification
        prob: Current overapproximated reach probability
        in_unsafe: Cell overlaps the unsafe set; prob pinned at 1
        absorbing: Cell lies in an absorbing safe region; prob pinned at 0
        per_action_prob: Last Bellman values per action index
    """
    id: int
    lows: np.ndarray
    highs: np.ndarray
    action_set: int = 0
    candidates: int = 0
    prob: float = 0.0
    in_unsafe: bool = False
    absorbing: bool = False
    per_action_prob: Optional[Dict[int, float]] = None
    depth: int = 0
    parent: Optional[int] = field(default=None, repr=False)
    children: List['Cell'] = field(default_factory=list, repr=False)
    split_dims: Tuple[int, ...] = field(default=(), repr=False)

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def dim(self) -> int:
        return self.lows.shape[0]

    @property
    def widths(self) -> np.ndarray:
        return self.highs - self.lows

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lows + self.highs)

    @property
    def volume(self) -> float:
        return float(np.prod(self.widths))

    @property
    def pinned(self) -> bool:
        return self.in_unsafe or self.absorbing

    def pin_unsafe(self) -> None:
        self.in_unsafe = True
        self.absorbing = False
        self.prob = 1.0

    def pin_absorbing(self) -> None:
        self.absorbing = True
        self.prob = 0.0

    def splittable_dims(self, min_size: Sequence[float]) -> List[int]:
        """Dimensions whose width still exceeds the minimum cell size."""
        return [int(d) for d in np.flatnonzero(self.widths > np.asarray(min_size))]


def box_intersects(lows: np.ndarray, highs: np.ndarray,
                   box_lows: np.ndarray, box_highs: np.ndarray) -> bool:
    """
    Overlap rule for transition images.

    Along dimensions where the box has positive width, the overlap must have
    positive length; along zero-width dimensions the closed intervals must
    meet. A box that merely touches a cell's face therefore does not overlap
    it, unless the box itself is flat in that dimension.
    """
    flat = box_highs == box_lows
    overlap = np.minimum(highs, box_highs) - np.maximum(lows, box_lows)
    return bool(np.all(np.where(flat, overlap >= 0, overlap > 0)))


class PartitionTree:
    """
    k-d style tree of cells covering a rectangular domain.

    Example:
        >>> tree = PartitionTree([0, 0], [1, 1])
        >>> left, right = tree.split(0, [0])
        >>> tree.locate([0.5, 0.2]) == right
        True
    """

    def __init__(self, lows: Sequence[float], highs: Sequence[float]) -> None:
        lows = np.asarray(lows, dtype=np.float64)
        highs = np.asarray(highs, dtype=np.float64)
        if lows.ndim != 1 or lows.shape != highs.shape or lows.shape[0] == 0:
            raise ValueError("domain lows and highs must be 1-D arrays of equal length")
        if not np.all(lows < highs):
            raise ValueError("domain lows must be strictly below highs")
        self.root = Cell(id=0, lows=lows, highs=highs)
        self.cells: Dict[int, Cell] = {0: self.root}
        self.leaves: Dict[int, Cell] = {0: self.root}
        self._next_id = 1
        # Bumped on every split so overlap caches can be invalidated
        self.version = 0

    # ==================== Basic access ====================

    @property
    def dim(self) -> int:
        return self.root.dim

    def __len__(self) -> int:
        return len(self.leaves)

    def __getitem__(self, cell_id: int) -> Cell:
        return self.cells[cell_id]

    def iter_leaves(self) -> Iterator[Cell]:
        """Leaves in ascending id order."""
        for cell_id in sorted(self.leaves):
            yield self.leaves[cell_id]

    def total_volume(self) -> float:
        return sum(c.volume for c in self.leaves.values())

    def is_descendant(self, cell_id: int, ancestor_id: int) -> bool:
        node: Optional[int] = cell_id
        while node is not None:
            if node == ancestor_id:
                return True
            node = self.cells[node].parent
        return False

    # ==================== Split ====================

    def split(self, cell_id: int, dims: Iterable[int]) -> List[int]:
        """
        Bisect a leaf along the given dimensions.

        Children inherit the parent's action set (as both action_set and
        reverification candidates) and its probability estimate. Child j takes
        the upper half of dims[t] iff bit t of j is set (dims sorted).

        Raises:
            NotALeafError: If cell_id is an internal node
            EmptySplitError: If dims is empty
            DegenerateSplitError: If a midpoint equals one of its bounds
        """
        if cell_id not in self.cells:
            raise PartitionError(f"unknown cell id {cell_id}")
        cell = self.cells[cell_id]
        if not cell.is_leaf:
            raise NotALeafError(f"cell {cell_id} is not a leaf")
        dims = sorted(set(int(d) for d in dims))
        if not dims:
            raise EmptySplitError(f"no dimensions given to split cell {cell_id}")
        if dims[0] < 0 or dims[-1] >= cell.dim:
            raise PartitionError(f"split dimensions {dims} out of range")

        mids = {}
        for d in dims:
            lo, hi = cell.lows[d], cell.highs[d]
            mid = 0.5 * (lo + hi)
            if not lo < mid < hi:
                raise DegenerateSplitError(
                    f"cell {cell_id} cannot be bisected along dimension {d} "
                    f"(width {hi - lo!r})"
                )
            mids[d] = mid

        inherited = cell.action_set or cell.candidates
        new_ids = []
        for j in range(1 << len(dims)):
            lows = cell.lows.copy()
            highs = cell.highs.copy()
            for t, d in enumerate(dims):
                if (j >> t) & 1:
                    lows[d] = mids[d]
                else:
                    highs[d] = mids[d]
            child = Cell(
                id=self._next_id,
                lows=lows,
                highs=highs,
                action_set=cell.action_set,
                candidates=inherited,
                prob=cell.prob,
                depth=cell.depth + 1,
                parent=cell.id,
            )
            self._next_id += 1
            cell.children.append(child)
            self.cells[child.id] = child
            self.leaves[child.id] = child
            new_ids.append(child.id)

        cell.split_dims = tuple(dims)
        cell.per_action_prob = None
        del self.leaves[cell_id]
        self.version += 1
        logger.debug("Split cell %d along %s into %s", cell_id, dims, new_ids)
        return new_ids

    # ==================== Queries ====================

    def _child_for(self, cell: Cell, x: np.ndarray) -> Cell:
        j = 0
        for t, d in enumerate(cell.split_dims):
            mid = cell.children[0].highs[d]
            if x[d] >= mid:
                j |= 1 << t
        return cell.children[j]

    def locate(self, x: Sequence[float]) -> int:
        """
        Id of the unique leaf containing x.

        Raises:
            DomainError: If x lies outside the root domain
        """
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise DomainError(f"point has dimension {x.shape}, tree has {self.dim}")
        if not (np.all(x >= self.root.lows) and np.all(x <= self.root.highs)):
            raise DomainError(f"point {x.tolist()} is outside the domain")
        node = self.root
        while not node.is_leaf:
            node = self._child_for(node, x)
        return node.id

    def overlapping(self, lows: Sequence[float], highs: Sequence[float]) -> List[int]:
        """
        Ids of the leaves a closed query box overlaps (see box_intersects).

        Raises:
            DomainError: If the box does not meet the domain
        """
        blo = np.asarray(lows, dtype=np.float64)
        bhi = np.asarray(highs, dtype=np.float64)
        if blo.shape != (self.dim,) or bhi.shape != (self.dim,):
            raise DomainError(f"query box dimension differs from tree dimension {self.dim}")
        if np.any(blo > bhi):
            raise ValueError("query box lows must not exceed highs")
        if not box_intersects(self.root.lows, self.root.highs, blo, bhi):
            raise DomainError(f"query box {blo.tolist()}..{bhi.tolist()} misses the domain")

        found = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                found.append(node.id)
                continue
            for child in node.children:
                if box_intersects(child.lows, child.highs, blo, bhi):
                    stack.append(child)
        return found

    # ==================== Construction helpers ====================

    @classmethod
    def uniform(cls, lows: Sequence[float], highs: Sequence[float],
                min_size: Sequence[float]) -> 'PartitionTree':
        """Tree whose leaves are all bisected down to the minimum cell size."""
        tree = cls(lows, highs)
        pending = [tree.root]
        while pending:
            cell = pending.pop()
            dims = cell.splittable_dims(min_size)
            if dims:
                pending.extend(tree.cells[i] for i in tree.split(cell.id, dims))
        return tree

    @classmethod
    def from_leaves(cls, lows: Sequence[float], highs: Sequence[float],
                    leaves: Sequence[Cell]) -> 'PartitionTree':
        """
        Rebuild a bisection tree from its leaves.

        A node is split along every dimension in which no contained leaf spans
        its full width. Leaf ids and attributes are preserved.

        Raises:
            PartitionError: If the leaves do not come from a bisection of the domain
        """
        tree = cls(lows, highs)
        tree._next_id = max([c.id for c in leaves] + [0]) + 1
        tree._adopt(tree.root, list(leaves))
        tree._next_id = max(tree.cells) + 1
        tree.version = 0
        return tree

    def _adopt(self, node: Cell, leaves: List[Cell]) -> None:
        if not leaves:
            raise PartitionError(f"no leaves cover box {node.lows.tolist()}..{node.highs.tolist()}")
        if len(leaves) == 1:
            leaf = leaves[0]
            if not (np.allclose(leaf.lows, node.lows, rtol=0, atol=1e-12 * (1 + np.abs(node.lows)))
                    and np.allclose(leaf.highs, node.highs, rtol=0,
                                    atol=1e-12 * (1 + np.abs(node.highs)))):
                raise PartitionError(f"leaf {leaf.id} does not match its tree node")
            self._rekey(node, leaf.id)
            for name in ('action_set', 'candidates', 'prob', 'in_unsafe',
                         'absorbing', 'per_action_prob'):
                setattr(node, name, getattr(leaf, name))
            return

        widths = node.widths
        dims = [d for d in range(node.dim)
                if all(leaf.highs[d] - leaf.lows[d] < 0.75 * widths[d] for leaf in leaves)]
        if not dims:
            raise PartitionError(f"overlapping leaves inside cell {node.id}")
        children = [self.cells[i] for i in self.split(node.id, dims)]
        groups: Dict[int, List[Cell]] = {c.id: [] for c in children}
        for leaf in leaves:
            owner = self._child_for(node, 0.5 * (leaf.lows + leaf.highs))
            groups[owner.id].append(leaf)
        for child in children:
            self._adopt(child, groups[child.id])

    def _rekey(self, node: Cell, new_id: int) -> None:
        if node.id == new_id:
            return
        if new_id in self.cells:
            raise PartitionError(f"duplicate cell id {new_id}")
        del self.cells[node.id]
        self.leaves.pop(node.id, None)
        node.id = new_id
        self.cells[new_id] = node
        self.leaves[new_id] = node
        for child in node.children:
            child.parent = new_id


BoxPredicate = Callable[[np.ndarray, np.ndarray], bool]


def refine_unsafe(tree: PartitionTree, unsafe: BoxPredicate, inside: BoxPredicate,
                  min_size: Sequence[float]) -> List[int]:
    """
    Split leaves that meet the unsafe set without lying inside it.

    Splitting continues down to the minimum cell size, so the cells pinned at
    probability one hug the unsafe set.

    Returns:
        Ids of the new leaves
    """
    created = []
    stack = list(tree.iter_leaves())[::-1]
    while stack:
        cell = stack.pop()
        if not unsafe(cell.lows, cell.highs) or inside(cell.lows, cell.highs):
            continue
        dims = cell.splittable_dims(min_size)
        if dims:
            ids = tree.split(cell.id, dims)
            created.extend(ids)
            stack.extend(tree[i] for i in ids)
    new_leaves = [i for i in created if i in tree.leaves]
    if new_leaves:
        logger.debug("Unsafe-boundary refinement added %d leaves", len(new_leaves))
    return new_leaves
