"""
cellcheck - Sound reach probabilities for neural network controllers.

Quick usage:
    >>> import cellcheck
    >>> net = cellcheck.load_network('continuum.net')
    >>> tree, stats = cellcheck.verify(net, [0, 0], [20, 20], min_size=[0.25, 0.25])
    >>> field = cellcheck.model_check(net, cellcheck.ContinuumWorld(), min_size=[0.5, 0.5])
    >>> field.max_prob()

Full usage:
    >>> from cellcheck import CheckConfig, ContinuumWorld, check
    >>> config = CheckConfig(min_size=[0.25, 0.25], transition_threshold=0.1)
    >>> field = check(net, ContinuumWorld(), config)
    >>> field.prob_at([2.0, 3.0])
"""

import os
from typing import List, Optional, Sequence, Tuple, Union

__version__ = '0.1.0'

from .network import Network, NetworkParser, load_network, save_network
from .verifier import (
    IntervalVector,
    IntervalVerifier,
    mask_labels,
    possible_actions,
    propagate_bounds,
)
from .partition import Cell, PartitionTree, refine_unsafe
from .adaptive import SplitStrategy, VerifierStats, adaptive_verify, reverify, uniform_verify
from .dynamics import (
    AffineOutcome,
    ContinuumWorld,
    DynamicsModel,
    TransitionOutcome,
    VcasModel,
    get_model,
)
from .checker import (
    CheckConfig,
    CheckStats,
    ModelChecker,
    LayeredChecker,
    ProbField,
    bellman_update,
    check,
    check_layered,
    transition_range,
)
from .baseline import (
    ExactResult,
    MonteCarloEstimate,
    TabularPolicy,
    exact_check,
    monte_carlo,
    monte_carlo_batch,
)
from .exporters import FieldExporter, read_partition, read_table, write_table
from .exceptions import (
    CellCheckError,
    NetworkFormatError,
    ShapeMismatchError,
    NonFiniteWeightError,
    DimensionError,
    DimensionTooLargeError,
    PartitionError,
    NotALeafError,
    EmptySplitError,
    DegenerateSplitError,
    DomainError,
    ModelError,
    UnknownActionError,
    ConfigError,
    ExportFormatError,
    ConvergenceWarning,
)

DATA_DIR = os.path.join(os.path.dirname(__file__), 'data')

__all__ = [
    # Convenience functions
    'verify',
    'model_check',
    'shipped_network',

    # Networks
    'Network',
    'NetworkParser',
    'load_network',
    'save_network',

    # Verification
    'IntervalVector',
    'IntervalVerifier',
    'mask_labels',
    'possible_actions',
    'propagate_bounds',
    'SplitStrategy',
    'VerifierStats',
    'adaptive_verify',
    'reverify',
    'uniform_verify',

    # Partitions
    'Cell',
    'PartitionTree',
    'refine_unsafe',

    # Dynamics
    'AffineOutcome',
    'ContinuumWorld',
    'DynamicsModel',
    'TransitionOutcome',
    'VcasModel',
    'get_model',

    # Model checking
    'CheckConfig',
    'CheckStats',
    'ModelChecker',
    'LayeredChecker',
    'ProbField',
    'bellman_update',
    'check',
    'check_layered',
    'transition_range',

    # Baselines
    'ExactResult',
    'MonteCarloEstimate',
    'TabularPolicy',
    'exact_check',
    'monte_carlo',
    'monte_carlo_batch',

    # Exporters
    'FieldExporter',
    'read_partition',
    'read_table',
    'write_table',

    # Exceptions
    'CellCheckError',
    'NetworkFormatError',
    'ShapeMismatchError',
    'NonFiniteWeightError',
    'DimensionError',
    'DimensionTooLargeError',
    'PartitionError',
    'NotALeafError',
    'EmptySplitError',
    'DegenerateSplitError',
    'DomainError',
    'ModelError',
    'UnknownActionError',
    'ConfigError',
    'ExportFormatError',
    'ConvergenceWarning',
]


# ==================== Convenience Functions ====================

def shipped_network(name: str) -> Network:
    """
    Load one of the benchmark networks shipped with the package.

    Args:
        name: 'continuum' or 'vcas_slice'

    Example:
        >>> net = cellcheck.shipped_network('continuum')
        >>> net.action_labels
        ('up', 'down', 'left', 'right')
    """
    return load_network(os.path.join(DATA_DIR, f'{name}.net'))


def verify(
    net: Network,
    lows: Sequence[float],
    highs: Sequence[float],
    min_size: Sequence[float],
    strategy: Union[str, SplitStrategy] = SplitStrategy.INFORMED,
    **kwargs
) -> Tuple[PartitionTree, VerifierStats]:
    """
    Partition a domain so every leaf carries its possible-action set.

    Args:
        net: Network to verify
        lows, highs: Domain box
        min_size: Per-dimension minimum cell width
        strategy: 'informed' or 'all'
        **kwargs: Additional arguments passed to adaptive_verify

    Returns:
        (partition tree, verification statistics)

    Example:
        >>> import cellcheck
        >>> net = cellcheck.shipped_network('continuum')
        >>> tree, stats = cellcheck.verify(net, [0, 0], [20, 20], [0.5, 0.5])
        >>> stats.leaves_multi
    """
    return adaptive_verify(net, lows, highs, min_size, strategy, **kwargs)


def model_check(
    nets,
    model: DynamicsModel,
    min_size: Sequence[float],
    transition_threshold: Optional[float] = None,
    action_threshold=None,
    layered: bool = False,
    readout_modes: Optional[List[str]] = None,
    **kwargs
) -> ProbField:
    """
    Compute overapproximated reach probabilities in one call.

    Args:
        nets: A network, one per mode, or a mapping from mode label to network
        model: Dynamics model
        min_size: Per-dimension minimum cell width
        transition_threshold: Transition-range split threshold (None: off)
        action_threshold: Action-range split threshold or schedule (None: off)
        layered: Use backward induction over tau layers
        readout_modes: Layered only: modes of the tau curve
        **kwargs: Additional CheckConfig fields

    Example:
        >>> import cellcheck
        >>> net = cellcheck.shipped_network('continuum')
        >>> field = cellcheck.model_check(net, cellcheck.ContinuumWorld(), [0.5, 0.5],
        ...                               transition_threshold=0.1)
        >>> field.max_prob()
        1.0
    """
    config = CheckConfig(min_size=min_size, transition_threshold=transition_threshold,
                         action_threshold=action_threshold, **kwargs)
    if layered:
        return check_layered(nets, model, config, readout_modes)
    return check(nets, model, config)
