"""
Overapproximated reach-probability model checking.

The probability of eventually reaching the unsafe set is computed per cell by
value iteration in which every cell may take any action of its verified
action set and every stochastic outcome is charged to the worst cell its
image overlaps:

    Pr(c, a) = sum_i p_i * max_{c' overlapping image_i(c, a)} Pr(c')
    Pr(c)    = max_{a in A_c} Pr(c, a)

Two online heuristics refine the partition while iterating: a cell whose
outcome images straddle cells of very different probability is split
(transition range), and so is a cell whose actions lead to very different
probabilities (action range).
"""

import logging
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import (
    Callable,
    Dict,
    Iterator,
    List,
    Mapping,
    NamedTuple,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import numpy as np

from .adaptive import SplitStrategy, VerifierStats, adaptive_verify, reverify, uniform_verify
from .dynamics.base import DynamicsModel
from .exceptions import ConfigError, ConvergenceWarning, DimensionError, DomainError, ModelError
from .network import Network
from .partition import Cell, PartitionTree, refine_unsafe
from .verifier import DEFAULT_REFINE_DEPTH, IntervalVerifier, indices_from_mask

logger = logging.getLogger(__name__)

DEFAULT_EPS = 1e-6
DEFAULT_MAX_SWEEPS = 2000
INITIAL_PARTITIONS = ('adaptive', 'uniform')

Schedule = Sequence[Tuple[int, float]]
Networks = Union[Network, Sequence[Network], Mapping[str, Network]]


# ==================== Configuration ====================

class ThresholdSchedule:
    """
    Piecewise-constant threshold indexed by sweep number.

    A plain number applies from the first sweep; a list of (start sweep,
    value) pairs switches value at each start. Before the first start (or when
    built from None) the threshold is disabled and at() returns None.
    """

    def __init__(self, value: Union[None, float, Schedule] = None) -> None:
        if value is None:
            steps = []
        elif isinstance(value, (int, float)):
            steps = [(0, float(value))]
        else:
            steps = sorted((int(start), float(v)) for start, v in value)
        for start, v in steps:
            if start < 0:
                raise ConfigError(f"schedule start sweep must be >= 0, got {start}")
            if not math.isfinite(v) or v < 0:
                raise ConfigError(f"thresholds must be finite and >= 0, got {v}")
        self.steps = steps

    def at(self, sweep: int) -> Optional[float]:
        current = None
        for start, value in self.steps:
            if start > sweep:
                break
            current = value
        return current

    def to_list(self) -> List[List[float]]:
        return [[start, value] for start, value in self.steps]


@dataclass
class CheckConfig:
    """
    Parameters of one model-checking run.

    Attributes:
        min_size: Per-dimension minimum cell width (network input order)
        transition_threshold: Split cells whose transition range exceeds
            this (None disables the heuristic)
        action_threshold: Split cells whose action range exceeds this; a
            number or a [(start sweep, value), ...] schedule (None disables)
        convergence_eps: Stop when no cell moves by this much and nothing split
        max_sweeps: Hard sweep limit; hitting it flags the field unconverged
        strategy: Split strategy of adaptive verification
        depth: Bisection depth of each verifier query
        initial_partition: 'adaptive' or 'uniform' (every cell at min_size)
        refine_unsafe: Refine cells straddling the unsafe set before iterating
        pin_absorbing: Pin absorbing safe cells (e.g. the goal) at zero
        threads: Worker threads for the read-only half of each sweep
    """
    min_size: Sequence[float]
    transition_threshold: Optional[float] = None
    action_threshold: Union[None, float, Schedule] = None
    convergence_eps: float = DEFAULT_EPS
    max_sweeps: int = DEFAULT_MAX_SWEEPS
    strategy: SplitStrategy = SplitStrategy.INFORMED
    depth: int = DEFAULT_REFINE_DEPTH
    initial_partition: str = 'adaptive'
    refine_unsafe: bool = True
    pin_absorbing: bool = True
    threads: int = 1
    _schedule: ThresholdSchedule = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.min_size = np.asarray(self.min_size, dtype=np.float64)
        if self.min_size.ndim != 1 or not np.all(np.isfinite(self.min_size)) \
                or np.any(self.min_size <= 0):
            raise ConfigError("min_size must be a vector of positive finite widths")
        if self.transition_threshold is not None:
            t = float(self.transition_threshold)
            if not math.isfinite(t) or t < 0:
                raise ConfigError(f"transition threshold must be finite and >= 0, got {t}")
            self.transition_threshold = t
        self._schedule = ThresholdSchedule(self.action_threshold)
        if not (math.isfinite(self.convergence_eps) and self.convergence_eps > 0):
            raise ConfigError("convergence_eps must be positive")
        if self.max_sweeps < 1:
            raise ConfigError("max_sweeps must be at least 1")
        try:
            self.strategy = SplitStrategy(self.strategy)
        except ValueError:
            raise ConfigError(f"unknown split strategy {self.strategy!r}") from None
        if self.depth < 0:
            raise ConfigError("verifier depth must be >= 0")
        if self.initial_partition not in INITIAL_PARTITIONS:
            raise ConfigError(f"initial partition must be one of {INITIAL_PARTITIONS}")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")

    def action_threshold_at(self, sweep: int) -> Optional[float]:
        return self._schedule.at(sweep)

    def to_dict(self) -> dict:
        return {
            'min_size': self.min_size.tolist(),
            'transition_threshold': self.transition_threshold,
            'action_threshold': self._schedule.to_list(),
            'convergence_eps': self.convergence_eps,
            'max_sweeps': self.max_sweeps,
            'strategy': self.strategy.value,
            'depth': self.depth,
            'initial_partition': self.initial_partition,
            'refine_unsafe': self.refine_unsafe,
            'pin_absorbing': self.pin_absorbing,
            'threads': self.threads,
        }


@dataclass
class CheckStats:
    """Counters for one model-checking run."""
    sweeps: int = 0
    transition_splits: int = 0
    action_splits: int = 0
    unsafe_refined_leaves: int = 0
    verifier_calls: int = 0
    leaves_initial: int = 0
    leaves_before_final_splits: int = 0
    leaves_final: int = 0
    wall_time: float = 0.0
    verification: VerifierStats = field(default_factory=VerifierStats)

    def to_dict(self) -> dict:
        return asdict(self)


# ==================== Result ====================

@dataclass
class ProbField:
    """
    Overapproximated reach probabilities over a partition.

    Attributes:
        model: Dynamics the field was computed for (None when read from a file)
        trees: One partition per mode (for layered fields, the top tau layer)
        layers: Layered fields only: layers[k][mode] covers tau == k
        tau_index: Layered fields only: position of tau in the full state
        sweeps: Sweeps performed (tau layers for layered fields)
        max_delta: Largest per-cell change in the last sweep
        converged: False if the sweep limit stopped the iteration
        tau_curve: Layered fields only: (tau, max probability) per layer
    """
    model: Optional[DynamicsModel]
    trees: List[PartitionTree]
    stats: CheckStats = field(default_factory=CheckStats)
    layers: Optional[List[List[PartitionTree]]] = None
    tau_index: Optional[int] = None
    sweeps: int = 0
    max_delta: float = math.inf
    converged: bool = False
    tau_curve: Optional[List[Tuple[int, float]]] = None

    @property
    def layered(self) -> bool:
        return self.layers is not None

    def iter_cells(self) -> Iterator[Tuple[int, Optional[int], Cell]]:
        """(mode, tau layer or None, leaf) for every leaf of the field."""
        if self.layers is not None:
            for k, trees in enumerate(self.layers):
                for mode, tree in enumerate(trees):
                    for cell in tree.iter_leaves():
                        yield mode, k, cell
        else:
            for mode, tree in enumerate(self.trees):
                for cell in tree.iter_leaves():
                    yield mode, None, cell

    def num_leaves(self) -> int:
        return sum(1 for _ in self.iter_cells())

    def max_prob(self, modes: Optional[Sequence[int]] = None) -> float:
        wanted = None if modes is None else set(modes)
        return max((c.prob for m, _, c in self.iter_cells() if wanted is None or m in wanted),
                   default=0.0)

    def cell_at(self, x: Sequence[float], mode: int = 0) -> Cell:
        """
        Leaf containing a full model state.

        Raises:
            DomainError: If x is outside the domain, or (layered fields) its
                tau is not one of the integer layers
        """
        x = np.asarray(x, dtype=np.float64)
        if self.layers is None:
            tree = self.trees[mode]
            return tree[tree.locate(x)]
        t = self.tau_index
        k = x[t]
        if k != round(k) or not 0 <= k < len(self.layers):
            raise DomainError(f"tau {k} is not a layer of this field")
        tree = self.layers[int(k)][mode]
        return tree[tree.locate(np.delete(x, t))]

    def prob_at(self, x: Sequence[float], mode: int = 0) -> float:
        return self.cell_at(x, mode).prob


# ==================== Cell-level operations ====================

class Neighborhood(NamedTuple):
    """Leaves of the successor-mode tree overlapped by one outcome image."""
    probability: float
    mode: int
    cell_ids: List[int]


def outcome_spread(values: Sequence[Sequence[float]]) -> float:
    """Largest (max - min) over the neighbour probabilities of each outcome."""
    return max((max(v) - min(v) for v in values), default=0.0)


def worst_case_value(probabilities: Sequence[float], values: Sequence[Sequence[float]]) -> float:
    """Each outcome's probability charged to its worst neighbour, capped at 1."""
    return min(1.0, sum(p * max(v) for p, v in zip(probabilities, values)))


def action_range(per_action: Mapping[int, float]) -> float:
    """Spread of the per-action probabilities; 0 for a single action."""
    if len(per_action) <= 1:
        return 0.0
    probs = list(per_action.values())
    return max(probs) - min(probs)


def _as_trees(trees: Union[PartitionTree, Sequence[PartitionTree]]) -> Sequence[PartitionTree]:
    return [trees] if isinstance(trees, PartitionTree) else trees


def outcome_neighborhoods(model: DynamicsModel, trees, cell: Cell, action: int,
                          mode: int = 0) -> List[Neighborhood]:
    trees = _as_trees(trees)
    return [
        Neighborhood(out.probability, out.mode, trees[out.mode].overlapping(out.lows, out.highs))
        for out in model.outcomes(cell.lows, cell.highs, mode, action)
    ]


def _neighbor_values(trees: Sequence[PartitionTree], hoods: Sequence[Neighborhood]):
    return [[trees[h.mode].leaves[i].prob for i in h.cell_ids] for h in hoods]


def transition_range(model: DynamicsModel, trees, cell: Cell, action: int, mode: int = 0) -> float:
    """Largest probability spread among the cells any single outcome can land in."""
    trees = _as_trees(trees)
    return outcome_spread(_neighbor_values(trees, outcome_neighborhoods(model, trees, cell, action, mode)))


def bellman_update(model: DynamicsModel, trees, cell: Cell,
                   mode: int = 0) -> Tuple[Dict[int, float], float]:
    """
    Worst-case Bellman backup of one cell against the current probabilities.

    Returns:
        (per-action probabilities, cell probability); pinned cells return
        their pinned value unchanged
    """
    if cell.pinned:
        return dict(cell.per_action_prob or {}), cell.prob
    trees = _as_trees(trees)
    per_action = {}
    for a in indices_from_mask(cell.action_set):
        hoods = outcome_neighborhoods(model, trees, cell, a, mode)
        per_action[a] = worst_case_value([h.probability for h in hoods],
                                         _neighbor_values(trees, hoods))
    return per_action, max(per_action.values())


# ==================== Setup helpers ====================

def networks_per_mode(nets: Networks, model: DynamicsModel) -> List[Network]:
    """
    One network per model mode.

    Accepts a single network (shared by all modes), a sequence ordered like
    the model's modes, or a mapping from mode label to network.

    Raises:
        ConfigError: If the networks do not match the model's modes
        DimensionError: If a network's inputs or outputs do not fit the model
    """
    if isinstance(nets, Network):
        nets = [nets] * model.num_modes
    elif isinstance(nets, Mapping):
        missing = [m for m in model.mode_labels if m not in nets]
        if missing:
            raise ConfigError(f"no network given for modes {missing}")
        nets = [nets[m] for m in model.mode_labels]
    else:
        nets = list(nets)
        if len(nets) == 1:
            nets = nets * model.num_modes
        elif len(nets) != model.num_modes:
            raise ConfigError(f"{len(nets)} networks given for {model.num_modes} modes")
    for net in nets:
        if net.input_dim != model.state_dim:
            raise DimensionError(
                f"network has {net.input_dim} inputs, model state has {model.state_dim} dimensions"
            )
        if net.output_dim != model.num_actions:
            raise DimensionError(
                f"network has {net.output_dim} outputs, model has {model.num_actions} actions"
            )
    return nets


class NeighborCache:
    """Outcome neighbourhoods per (mode, cell, action), dropped whenever a tree splits."""

    def __init__(self, trees: Sequence[PartitionTree]) -> None:
        self.trees = trees
        self._versions: Optional[Tuple[int, ...]] = None
        self._entries: Dict[Tuple[int, int, int], List[Neighborhood]] = {}
        self.hits = 0
        self.misses = 0

    def sync(self) -> None:
        versions = tuple(t.version for t in self.trees)
        if versions != self._versions:
            self._entries.clear()
            self._versions = versions

    def get(self, key: Tuple[int, int, int], compute: Callable[[], List[Neighborhood]]):
        entry = self._entries.get(key)
        if entry is None:
            self.misses += 1
            entry = compute()
            self._entries[key] = entry
        else:
            self.hits += 1
        return entry


class _CellResult(NamedTuple):
    mode: int
    cell: Cell
    split: Optional[str] = None
    per_action: Optional[Dict[int, float]] = None
    prob: float = 0.0


# ==================== Sweep-based checking ====================

class ModelChecker:
    """
    Jacobi-style value iteration with online splitting.

    Each sweep first evaluates every unpinned leaf against the probabilities
    of the previous sweep (read-only, optionally on a thread pool), then
    writes the new probabilities and applies the queued splits. Children of a
    split take part from the next sweep on, starting from their parent's
    probability and with their action sets reverified against the parent's.
    """

    def __init__(self, nets: Networks, model: DynamicsModel, config: CheckConfig,
                 trees: Optional[Sequence[PartitionTree]] = None,
                 on_sweep: Optional[Callable[[int, List[PartitionTree]], None]] = None) -> None:
        if config.min_size.shape != (model.state_dim,):
            raise ConfigError(f"min_size needs {model.state_dim} entries")
        self.model = model
        self.config = config
        self.nets = networks_per_mode(nets, model)
        self.verifiers = [IntervalVerifier(n, config.depth) for n in self.nets]
        self.stats = CheckStats()
        self.on_sweep = on_sweep
        self.trees = self._initial_trees(trees)
        self.cache = NeighborCache(self.trees)

    def _initial_trees(self, trees: Optional[Sequence[PartitionTree]]) -> List[PartitionTree]:
        cfg = self.config
        model = self.model
        if trees is not None:
            trees = list(trees)
            if len(trees) != model.num_modes:
                raise ConfigError(f"{len(trees)} partitions given for {model.num_modes} modes")
            for mode, tree in enumerate(trees):
                if tree.dim != model.state_dim:
                    raise DimensionError(f"partition has dimension {tree.dim}, model {model.state_dim}")
                for cell in tree.iter_leaves():
                    if not cell.action_set:
                        reverify(self.verifiers[mode], cell)
        else:
            trees = []
            for net in self.nets:
                if cfg.initial_partition == 'uniform':
                    tree, vstats = uniform_verify(net, model.lows, model.highs, cfg.min_size, cfg.depth)
                else:
                    tree, vstats = adaptive_verify(net, model.lows, model.highs, cfg.min_size,
                                                   cfg.strategy, cfg.depth)
                self.stats.verification = self.stats.verification.merge(vstats)
                trees.append(tree)

        for mode, tree in enumerate(trees):
            if cfg.refine_unsafe:
                new = refine_unsafe(tree, model.unsafe, model.inside_unsafe, cfg.min_size)
                self.stats.unsafe_refined_leaves += len(new)
                for i in new:
                    reverify(self.verifiers[mode], tree[i])
            self._pin(tree.iter_leaves())
        return trees

    def _pin(self, cells) -> None:
        for cell in cells:
            if self.model.unsafe(cell.lows, cell.highs):
                cell.pin_unsafe()
            elif self.config.pin_absorbing and self.model.absorbing_safe(cell.lows, cell.highs):
                cell.pin_absorbing()
            else:
                cell.in_unsafe = False
                cell.absorbing = False

    def num_leaves(self) -> int:
        return sum(len(t) for t in self.trees)

    def _neighborhoods(self, mode: int, cell: Cell, action: int) -> List[Neighborhood]:
        return self.cache.get(
            (mode, cell.id, action),
            lambda: outcome_neighborhoods(self.model, self.trees, cell, action, mode),
        )

    def _evaluate(self, mode: int, cell: Cell, sweep: int) -> _CellResult:
        cfg = self.config
        dims = cell.splittable_dims(cfg.min_size)
        hoods = {a: self._neighborhoods(mode, cell, a) for a in indices_from_mask(cell.action_set)}
        values = {a: _neighbor_values(self.trees, h) for a, h in hoods.items()}

        if cfg.transition_threshold is not None and dims:
            spread = max(outcome_spread(v) for v in values.values())
            if spread > cfg.transition_threshold:
                return _CellResult(mode, cell, 'transition')

        per_action = {
            a: worst_case_value([h.probability for h in hoods[a]], values[a]) for a in hoods
        }
        threshold = cfg.action_threshold_at(sweep)
        if threshold is not None and dims and action_range(per_action) > threshold:
            return _CellResult(mode, cell, 'action')
        return _CellResult(mode, cell, None, per_action, max(per_action.values()))

    def _apply(self, results: List[_CellResult]) -> Tuple[float, int]:
        max_delta = 0.0
        splits = 0
        for r in results:
            if r.split is None:
                max_delta = max(max_delta, abs(r.prob - r.cell.prob))
                r.cell.prob = r.prob
                r.cell.per_action_prob = r.per_action
                continue
            tree = self.trees[r.mode]
            children = [tree[i] for i in tree.split(r.cell.id, r.cell.splittable_dims(self.config.min_size))]
            for child in children:
                reverify(self.verifiers[r.mode], child)
            self._pin(children)
            splits += 1
            if r.split == 'transition':
                self.stats.transition_splits += 1
            else:
                self.stats.action_splits += 1
        return max_delta, splits

    def run(self) -> ProbField:
        cfg = self.config
        start = time.perf_counter()
        self.stats.leaves_initial = self.num_leaves()
        logger.info("Model checking %s on %d leaves", type(self.model).__name__, self.stats.leaves_initial)

        max_delta = math.inf
        converged = False
        sweeps = 0
        pool = ThreadPoolExecutor(max_workers=cfg.threads) if cfg.threads > 1 else None
        try:
            for index in range(cfg.max_sweeps):
                self.cache.sync()
                tasks = [(m, c) for m, tree in enumerate(self.trees)
                         for c in tree.iter_leaves() if not c.pinned]

                def evaluate(task, index=index):
                    return self._evaluate(task[0], task[1], index)

                results = list(pool.map(evaluate, tasks)) if pool else [evaluate(t) for t in tasks]
                self.stats.leaves_before_final_splits = self.num_leaves()
                max_delta, splits = self._apply(results)
                sweeps = index + 1
                logger.info("Sweep %d: max delta %.3g, %d splits, %d leaves",
                            sweeps, max_delta, splits, self.num_leaves())
                if self.on_sweep is not None:
                    self.on_sweep(sweeps, self.trees)
                if splits == 0 and max_delta < cfg.convergence_eps:
                    converged = True
                    break
        finally:
            if pool is not None:
                pool.shutdown()

        if not converged:
            message = (f"value iteration stopped after {sweeps} sweeps with max delta "
                       f"{max_delta:.3g}; probabilities are incomplete")
            logger.warning(message)
            warnings.warn(message, ConvergenceWarning, stacklevel=3)

        self.stats.sweeps = sweeps
        self.stats.leaves_final = self.num_leaves()
        self.stats.verifier_calls = (self.stats.verification.verifier_calls
                                     + sum(v.calls for v in self.verifiers))
        self.stats.wall_time = time.perf_counter() - start
        return ProbField(self.model, self.trees, self.stats, sweeps=sweeps,
                         max_delta=max_delta, converged=converged)


def check(nets: Networks, model: DynamicsModel, config: CheckConfig,
          trees: Optional[Sequence[PartitionTree]] = None,
          on_sweep: Optional[Callable[[int, List[PartitionTree]], None]] = None) -> ProbField:
    """
    Compute an overapproximated reach probability for every cell.

    Args:
        nets: Policy network(s), one per model mode or shared
        model: Stochastic dynamics with unsafe and absorbing sets
        config: Thresholds, sizes and iteration limits
        trees: Pre-built partitions per mode; leaves without an action set
            are verified, the rest are used as given
        on_sweep: Called after every sweep with (sweep number, trees)

    Returns:
        ProbField; converged is False (and a ConvergenceWarning is emitted)
        when max_sweeps was reached first
    """
    return ModelChecker(nets, model, config, trees, on_sweep).run()


# ==================== Layered checking ====================

class LayeredChecker:
    """
    Backward induction over integer tau layers.

    Because tau drops by exactly one per step, layer k only depends on layer
    k - 1 and a single pass from tau = 0 upwards reaches the fixpoint. Each
    layer has one partition per mode over the remaining coordinates, built by
    adaptive verification of the network with tau held at k. Online splits
    happen immediately: children are reverified and evaluated in the same
    pass.
    """

    def __init__(self, nets: Networks, model: DynamicsModel, config: CheckConfig,
                 readout_modes: Optional[Sequence[str]] = None) -> None:
        if not hasattr(model, 'tau_index'):
            raise ConfigError(f"{type(model).__name__} has no tau coordinate to layer over")
        self.model = model
        self.config = config
        self.nets = networks_per_mode(nets, model)
        self.t = model.tau_index
        bottom, top = model.lows[self.t], model.highs[self.t]
        if bottom != 0 or top != round(top):
            raise ConfigError(f"tau range must be [0, integer], got [{bottom}, {top}]")
        self.horizon = int(top)
        self.lows = np.delete(model.lows, self.t)
        self.highs = np.delete(model.highs, self.t)

        min_size = config.min_size
        if min_size.shape == (model.state_dim,):
            min_size = np.delete(min_size, self.t)
        elif min_size.shape != (model.state_dim - 1,):
            raise ConfigError(f"min_size needs {model.state_dim} entries")
        self.min_size = min_size

        if readout_modes is None:
            self.readout = list(range(model.num_modes))
        else:
            self.readout = [model.mode_index(m) for m in readout_modes]
        self.stats = CheckStats()
        self._calls = 0
        self._initial_leaves = 0

    def _full(self, lows: np.ndarray, highs: np.ndarray, k: float) -> Tuple[np.ndarray, np.ndarray]:
        return np.insert(lows, self.t, k), np.insert(highs, self.t, k)

    def _pin(self, cells, k: int) -> None:
        for cell in cells:
            lows, highs = self._full(cell.lows, cell.highs, k)
            if self.model.unsafe(lows, highs):
                cell.pin_unsafe()
            elif k == 0:
                # Layers above 0 always take another step
                cell.pin_absorbing()

    def _refine_unsafe(self, tree: PartitionTree, k: int) -> List[int]:
        return refine_unsafe(
            tree,
            lambda lo, hi: self.model.unsafe(*self._full(lo, hi, k)),
            lambda lo, hi: self.model.inside_unsafe(*self._full(lo, hi, k)),
            self.min_size,
        )

    def _terminal_layer(self, mode: int) -> PartitionTree:
        tree = PartitionTree(self.lows, self.highs)
        self.stats.unsafe_refined_leaves += len(self._refine_unsafe(tree, 0))
        self._pin(tree.iter_leaves(), 0)
        self._initial_leaves += len(tree)
        return tree

    def _values(self, cell: Cell, k: int, mode: int, action: int,
                below: Sequence[PartitionTree]) -> Tuple[List[float], List[List[float]]]:
        lows, highs = self._full(cell.lows, cell.highs, k)
        probs, values = [], []
        for out in self.model.outcomes(lows, highs, mode, action):
            if out.lows[self.t] != k - 1 or out.highs[self.t] != k - 1:
                raise ModelError("layered checking needs tau to drop by exactly one per step")
            tree = below[out.mode]
            ids = tree.overlapping(np.delete(out.lows, self.t), np.delete(out.highs, self.t))
            probs.append(out.probability)
            values.append([tree.leaves[i].prob for i in ids])
        return probs, values

    def _layer(self, k: int, mode: int, below: Sequence[PartitionTree]) -> PartitionTree:
        cfg = self.config
        net = self.nets[mode].restrict({self.t: float(k)})
        if cfg.initial_partition == 'uniform':
            tree, vstats = uniform_verify(net, self.lows, self.highs, self.min_size, cfg.depth)
        else:
            tree, vstats = adaptive_verify(net, self.lows, self.highs, self.min_size,
                                           cfg.strategy, cfg.depth)
        self.stats.verification = self.stats.verification.merge(vstats)
        verifier = IntervalVerifier(net, cfg.depth)
        if cfg.refine_unsafe:
            for i in self._refine_unsafe(tree, k):
                reverify(verifier, tree[i])
        self._pin(tree.iter_leaves(), k)
        self._initial_leaves += len(tree)

        action_threshold = cfg.action_threshold_at(k - 1)
        stack = list(tree.iter_leaves())[::-1]
        while stack:
            cell = stack.pop()
            if cell.pinned:
                continue
            dims = cell.splittable_dims(self.min_size)
            scored = {a: self._values(cell, k, mode, a, below)
                      for a in indices_from_mask(cell.action_set)}

            split = None
            if cfg.transition_threshold is not None and dims:
                spread = max(outcome_spread(v) for _, v in scored.values())
                if spread > cfg.transition_threshold:
                    split = 'transition'
            if split is None:
                per_action = {a: worst_case_value(p, v) for a, (p, v) in scored.items()}
                if action_threshold is not None and dims and action_range(per_action) > action_threshold:
                    split = 'action'
                else:
                    cell.per_action_prob = per_action
                    cell.prob = max(per_action.values())
                    continue

            children = [tree[i] for i in tree.split(cell.id, dims)]
            for child in children:
                reverify(verifier, child)
            self._pin(children, k)
            stack.extend(children[::-1])
            if split == 'transition':
                self.stats.transition_splits += 1
            else:
                self.stats.action_splits += 1

        self._calls += verifier.calls
        return tree

    def run(self) -> ProbField:
        start = time.perf_counter()
        logger.info("Layered checking over tau = 0..%d for %d modes", self.horizon, self.model.num_modes)
        layers = [[self._terminal_layer(m) for m in range(self.model.num_modes)]]
        curve = [(0, self._layer_max(layers[0]))]
        for k in range(1, self.horizon + 1):
            layers.append([self._layer(k, m, layers[k - 1]) for m in range(self.model.num_modes)])
            curve.append((k, self._layer_max(layers[k])))
            logger.info("Layer tau=%d: %d leaves, max probability %.4g",
                        k, sum(len(t) for t in layers[k]), curve[-1][1])

        total = sum(len(t) for trees in layers for t in trees)
        self.stats.sweeps = self.horizon
        self.stats.leaves_initial = self._initial_leaves
        self.stats.leaves_before_final_splits = total
        self.stats.leaves_final = total
        self.stats.verifier_calls = self.stats.verification.verifier_calls + self._calls
        self.stats.wall_time = time.perf_counter() - start
        return ProbField(self.model, layers[-1], self.stats, layers=layers, tau_index=self.t,
                         sweeps=self.horizon,
                         max_delta=0.0, converged=True, tau_curve=curve)

    def _layer_max(self, trees: Sequence[PartitionTree]) -> float:
        return max((c.prob for m in self.readout for c in trees[m].iter_leaves()), default=0.0)


def check_layered(nets: Networks, model: DynamicsModel, config: CheckConfig,
                  readout_modes: Optional[Sequence[str]] = None) -> ProbField:
    """
    Layered model checking for models whose tau drops by one per step.

    The action-threshold schedule is indexed by layer (layer k uses the value
    for sweep k - 1). The returned tau_curve holds the largest probability of
    each layer over readout_modes (default: every mode).
    """
    return LayeredChecker(nets, model, config, readout_modes).run()
