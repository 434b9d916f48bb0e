"""
Independent oracles for the model checker.

exact_check runs classical fixed-policy reachability value iteration on a
lookup-table policy whose successors are snapped to the nearest grid node;
monte_carlo rolls the network policy out under sampled outcomes. Neither
uses cells or verification, so both can be used to test the checker.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .checker import Networks, ProbField, networks_per_mode
from .dynamics.base import DynamicsModel
from .exceptions import ConfigError, DimensionError

logger = logging.getLogger(__name__)

DEFAULT_HORIZON = 500
DEFAULT_EXACT_EPS = 1e-12


# ==================== Lookup-table policies ====================

def _nearest(axis: np.ndarray, values: np.ndarray) -> np.ndarray:
    if axis.shape[0] == 1:
        return np.zeros(values.shape[0], dtype=int)
    idx = np.clip(np.searchsorted(axis, values), 1, axis.shape[0] - 1)
    # Ties go to the lower node
    return idx - ((values - axis[idx - 1]) <= (axis[idx] - values))


def cell_centers(lows: Sequence[float], highs: Sequence[float],
                 counts: Sequence[int]) -> List[np.ndarray]:
    """Grid axes whose nodes are the centres of a uniform partition."""
    axes = []
    for lo, hi, n in zip(lows, highs, counts):
        if n < 1:
            raise ValueError("grid counts must be >= 1")
        width = (hi - lo) / n
        axes.append(lo + width * (np.arange(n) + 0.5))
    return axes


@dataclass(eq=False)
class TabularPolicy:
    """
    Lookup-table policy on a rectilinear grid, one table per model mode.

    Attributes:
        grid: Node coordinates per dimension, strictly increasing
        actions: Action index per (mode, node), shape (modes, n_1, ..., n_d)
        action_labels: Labels of the action indices

    Example:
        >>> grid = cell_centers([0, 0], [20, 20], [20, 20])
        >>> table = TabularPolicy.from_network(net, grid)
        >>> table.action_at([[0.5, 0.5]])
        array([0])
    """
    grid: List[np.ndarray]
    actions: np.ndarray
    action_labels: Tuple[str, ...]

    def __post_init__(self) -> None:
        self.grid = [np.asarray(axis, dtype=np.float64) for axis in self.grid]
        for k, axis in enumerate(self.grid):
            if axis.ndim != 1 or axis.shape[0] == 0 or np.any(np.diff(axis) <= 0):
                raise ValueError(f"grid axis {k} must be a nonempty increasing vector")
        self.actions = np.asarray(self.actions, dtype=int)
        if self.actions.ndim == len(self.grid):
            self.actions = self.actions[None, ...]
        if self.actions.shape[1:] != self.shape:
            raise DimensionError(f"action table shape {self.actions.shape[1:]} does not match grid {self.shape}")
        self.action_labels = tuple(self.action_labels)
        if np.any(self.actions < 0) or np.any(self.actions >= len(self.action_labels)):
            raise ValueError("action table holds indices outside the action labels")

    @property
    def dim(self) -> int:
        return len(self.grid)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(axis.shape[0] for axis in self.grid)

    @property
    def num_modes(self) -> int:
        return self.actions.shape[0]

    @property
    def num_nodes(self) -> int:
        return int(np.prod(self.shape))

    def nodes(self) -> np.ndarray:
        """All grid nodes, shape (num_nodes, dim), last dimension fastest."""
        mesh = np.meshgrid(*self.grid, indexing='ij')
        return np.stack([m.ravel() for m in mesh], axis=1)

    def snap(self, states: np.ndarray) -> np.ndarray:
        """Flat index of the nearest node of each state."""
        states = np.atleast_2d(np.asarray(states, dtype=np.float64))
        if states.shape[1] != self.dim:
            raise DimensionError(f"states have dimension {states.shape[1]}, grid has {self.dim}")
        idx = [_nearest(axis, states[:, k]) for k, axis in enumerate(self.grid)]
        return np.ravel_multi_index(tuple(idx), self.shape)

    def action_at(self, states: np.ndarray, mode: int = 0) -> np.ndarray:
        return self.actions[mode].ravel()[self.snap(states)]

    @classmethod
    def from_network(cls, nets: Sequence, grid: Sequence[Sequence[float]]) -> 'TabularPolicy':
        """Tabulate one or more networks (one per mode) at the grid nodes."""
        if not isinstance(nets, (list, tuple)):
            nets = [nets]
        table = cls(grid, np.zeros((len(nets),) + tuple(len(a) for a in grid), dtype=int),
                    nets[0].action_labels)
        nodes = table.nodes()
        for m, net in enumerate(nets):
            table.actions[m] = net.best_action_batch(nodes).reshape(table.shape)
        return table


# ==================== Exact model checking ====================

def solve_reachability(
    next_index: np.ndarray,
    next_prob: np.ndarray,
    target: np.ndarray,
    absorbing: np.ndarray,
    eps: float = DEFAULT_EXACT_EPS,
    max_iter: int = 1_000_000,
) -> Tuple[np.ndarray, int]:
    """
    Probability of eventually reaching the target states.

    Args:
        next_index: (N, K) successor state indices; -1 is a safe sink
        next_prob: (N, K) successor probabilities (padding entries 0)
        target: (N,) states whose value is fixed at 1
        absorbing: (N,) states whose value is fixed at 0
        eps: Stop once no value moves by this much

    Returns:
        (values, iterations)
    """
    target = np.asarray(target, dtype=bool)
    free = ~target & ~np.asarray(absorbing, dtype=bool)
    values = np.where(target, 1.0, 0.0)
    iterations = 0
    for iterations in range(1, max_iter + 1):
        extended = np.append(values, 0.0)
        backup = (next_prob * extended[next_index]).sum(axis=1)
        new = np.where(free, np.minimum(backup, 1.0), values)
        delta = float(np.max(np.abs(new - values))) if values.size else 0.0
        values = new
        if delta < eps:
            break
    else:
        logger.warning("Exact value iteration hit %d iterations without converging", max_iter)
    return values, iterations


@dataclass(eq=False)
class ExactResult:
    """Per-node reach probabilities of a tabular policy, shape (modes, n_1, ..., n_d)."""
    policy: TabularPolicy
    values: np.ndarray
    iterations: int

    def value_at(self, states: np.ndarray, mode: int = 0) -> np.ndarray:
        return self.values[mode].ravel()[self.policy.snap(states)]

    def interpolate(self, states: np.ndarray, mode: int = 0) -> np.ndarray:
        """Multilinear interpolation; not guaranteed to overapproximate."""
        return multilinear(self.policy.grid, self.values[mode], states)


def exact_check(policy: TabularPolicy, model: DynamicsModel,
                eps: float = DEFAULT_EXACT_EPS, max_iter: int = 1_000_000) -> ExactResult:
    """
    Reachability value iteration of a lookup-table policy.

    Point successors of every node are snapped to their nearest node; nodes
    in the unsafe set are fixed at 1 and absorbing nodes at 0.
    """
    if policy.num_modes != model.num_modes:
        raise ConfigError(f"table has {policy.num_modes} modes, model has {model.num_modes}")
    if policy.dim != model.state_dim:
        raise DimensionError(f"table has dimension {policy.dim}, model state {model.state_dim}")

    nodes = policy.nodes()
    n_nodes = nodes.shape[0]
    n_modes = model.num_modes
    unsafe = model.point_unsafe_batch(nodes)
    target = np.tile(unsafe, n_modes)
    absorbing = np.tile(model.point_absorbing_batch(nodes) & ~unsafe, n_modes)

    width = max(len(model.affine_outcomes(m, int(a)))
                for m in range(n_modes) for a in np.unique(policy.actions[m]))
    next_index = np.full((n_modes * n_nodes, width), -1, dtype=int)
    next_prob = np.zeros((n_modes * n_nodes, width))
    for m in range(n_modes):
        acts = policy.actions[m].ravel()
        for a in np.unique(acts):
            rows = np.flatnonzero(acts == a)
            for k, (p, nxt, next_mode, escaped) in enumerate(model.successors_batch(nodes[rows], m, int(a))):
                idx = next_mode * n_nodes + policy.snap(nxt)
                idx[escaped] = -1
                next_index[m * n_nodes + rows, k] = idx
                next_prob[m * n_nodes + rows, k] = p

    values, iterations = solve_reachability(next_index, next_prob, target, absorbing, eps, max_iter)
    logger.info("Exact check: %d states, %d iterations", values.size, iterations)
    return ExactResult(policy, values.reshape((n_modes,) + policy.shape), iterations)


def multilinear(grid: Sequence[np.ndarray], values: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Multilinear interpolation of node values; points outside the grid are clamped to it."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    values = np.asarray(values, dtype=np.float64)
    axes = [np.asarray(axis, dtype=np.float64) for axis in grid]
    # Single-node axes are constant along that dimension
    keep = [k for k, axis in enumerate(axes) if axis.shape[0] > 1]
    values = values[tuple(slice(None) if k in keep else 0 for k in range(len(axes)))]
    if not keep:
        return np.full(points.shape[0], float(values))
    clamped = np.column_stack([np.clip(points[:, k], axes[k][0], axes[k][-1]) for k in keep])
    interpolator = RegularGridInterpolator([axes[k] for k in keep], values, method='linear')
    return interpolator(clamped)


# ==================== Monte Carlo ====================

@dataclass(frozen=True)
class MonteCarloEstimate:
    """Fraction of rollouts that reached the unsafe set."""
    estimate: float
    stderr: float
    n: int
    hits: int

    @classmethod
    def from_hits(cls, hits: np.ndarray) -> 'MonteCarloEstimate':
        n = hits.shape[0]
        p = float(hits.mean())
        return cls(p, float(np.sqrt(p * (1.0 - p) / n)), n, int(hits.sum()))


def rollout(nets: List, model: DynamicsModel, states: np.ndarray, modes: np.ndarray,
            horizon: int, rng: np.random.Generator) -> np.ndarray:
    """
    Simulate rollouts in lockstep until each is unsafe, absorbed or out of time.

    Returns:
        Boolean array, True where the rollout reached the unsafe set
    """
    states = np.array(states, dtype=np.float64)
    modes = np.array(modes, dtype=int)
    hit = model.point_unsafe_batch(states)
    done = hit | model.point_absorbing_batch(states)
    for _ in range(horizon):
        active = np.flatnonzero(~done)
        if active.size == 0:
            break
        actions = np.empty(active.size, dtype=int)
        active_modes = modes[active]
        for m in np.unique(active_modes):
            sel = active_modes == m
            actions[sel] = nets[m].best_action_batch(states[active[sel]])
        nxt, next_modes, escaped = model.sample_step(states[active], active_modes, actions, rng)
        states[active] = nxt
        modes[active] = next_modes
        reached = model.point_unsafe_batch(nxt) & ~escaped
        hit[active] = reached
        done[active] = reached | escaped | model.point_absorbing_batch(nxt)
    return hit


def _check_rollout_args(n: int, horizon: int) -> None:
    if n < 1:
        raise ValueError("rollout count must be >= 1")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")


def monte_carlo(nets: Networks, model: DynamicsModel, start: Sequence[float], n: int = 1000,
                horizon: int = DEFAULT_HORIZON, seed: int = 0, mode: int = 0,
                start_index: int = 0) -> MonteCarloEstimate:
    """
    Estimate the reach probability from one start state.

    The random stream depends only on (seed, start_index), so estimates do not
    depend on which other starts are simulated or in which order.
    """
    _check_rollout_args(n, horizon)
    nets = networks_per_mode(nets, model)
    start = np.asarray(start, dtype=np.float64)
    if start.shape != (model.state_dim,):
        raise DimensionError(f"start state has shape {start.shape}, model state {model.state_dim}")
    rng = np.random.default_rng([seed, start_index])
    hits = rollout(nets, model, np.tile(start, (n, 1)), np.full(n, mode), horizon, rng)
    return MonteCarloEstimate.from_hits(hits)


def monte_carlo_batch(nets: Networks, model: DynamicsModel, starts: np.ndarray,
                      modes: Optional[Sequence[int]] = None, n: int = 1000,
                      horizon: int = DEFAULT_HORIZON, seed: int = 0) -> List[MonteCarloEstimate]:
    """
    Estimate reach probabilities from many start states in one lockstep batch.

    Uses a single random stream seeded with seed; results are reproducible for
    the same starts in the same order.
    """
    _check_rollout_args(n, horizon)
    nets = networks_per_mode(nets, model)
    starts = np.atleast_2d(np.asarray(starts, dtype=np.float64))
    if starts.shape[1] != model.state_dim:
        raise DimensionError(f"start states have dimension {starts.shape[1]}, model {model.state_dim}")
    modes = np.zeros(starts.shape[0], dtype=int) if modes is None else np.asarray(modes, dtype=int)
    rng = np.random.default_rng(seed)
    hits = rollout(nets, model, np.repeat(starts, n, axis=0), np.repeat(modes, n), horizon, rng)
    return [MonteCarloEstimate.from_hits(row) for row in hits.reshape(starts.shape[0], n)]


def start_states(field: ProbField, per_cell: int = 5, seed: int = 0,
                 include_center: bool = True) -> Tuple[np.ndarray, np.ndarray, List[Tuple[int, Optional[int], int]]]:
    """
    Start states for simulation: each leaf's centre plus uniform samples.

    Returns:
        (states, modes, cell keys) where a key is (mode, tau layer, cell id)
    """
    rng = np.random.default_rng(seed)
    states, modes, keys = [], [], []
    for mode, layer, cell in field.iter_cells():
        picks = []
        if include_center:
            picks.append(cell.center)
        extra = per_cell - len(picks)
        if extra > 0:
            picks.extend(rng.uniform(cell.lows, cell.highs, size=(extra, cell.dim)))
        for x in picks:
            if layer is not None:
                x = np.insert(x, field.tau_index, layer)
            states.append(x)
            modes.append(mode)
            keys.append((mode, layer, cell.id))
    return np.array(states), np.array(modes, dtype=int), keys
