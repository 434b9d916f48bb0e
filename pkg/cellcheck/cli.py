"""
Command-line interface for cellcheck.
"""

import argparse
import logging
import os
import sys
from typing import List, Optional

import numpy as np

from . import __version__
from .adaptive import SplitStrategy, adaptive_verify, uniform_verify
from .baseline import (
    DEFAULT_EXACT_EPS,
    DEFAULT_HORIZON,
    MonteCarloEstimate,
    TabularPolicy,
    cell_centers,
    exact_check,
    monte_carlo,
    start_states,
)
from .checker import CheckStats, ProbField, check, check_layered, networks_per_mode
from .config import RunConfig
from .dynamics import BOUNDARY_POLICIES, MODELS
from .exceptions import CellCheckError, ConfigError
from .exporters import (
    FieldExporter,
    compare_frame,
    mc_frame,
    read_frame,
    read_partition,
    read_header,
    read_table,
    save_frame,
    tau_curve_frame,
    write_table,
)
from .utils import (
    parse_assignments,
    parse_counts,
    parse_domain,
    parse_labels,
    parse_ranges,
    parse_schedule,
    parse_threshold,
    parse_vector,
)
from .verifier import DEFAULT_REFINE_DEPTH

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_IO = 1
EXIT_USAGE = 2
EXIT_INVALID = 3


def _add_model_args(parser: argparse.ArgumentParser, required: bool = True) -> None:
    parser.add_argument(
        '--model', '-m',
        choices=list(MODELS),
        default='continuum' if required else None,
        help='Dynamics model (default: continuum)' if required else 'Dynamics model'
    )
    parser.add_argument(
        '--boundary',
        choices=BOUNDARY_POLICIES,
        help='Out-of-domain policy (default: clamp)'
    )
    parser.add_argument(
        '--fix',
        dest='fixed',
        type=parse_assignments,
        help='vcas: hold vertical rates fixed, e.g. vown=0,vint=0'
    )
    parser.add_argument(
        '--range',
        dest='ranges',
        type=parse_ranges,
        help='vcas: coordinate ranges, e.g. h=-2000:2000,tau=0:20'
    )
    parser.add_argument(
        '--modes',
        type=parse_labels,
        help='vcas: previous advisories tracked as modes (default: all)'
    )


def _add_net_arg(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        '--net',
        type=parse_labels,
        required=True,
        help='Network file, or comma-separated files (one per mode)'
    )


def _add_partition_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        '--min-size',
        type=parse_vector,
        required=True,
        help='Minimum cell width per dimension, e.g. 0.25,0.25'
    )
    parser.add_argument(
        '--strategy',
        choices=[s.value for s in SplitStrategy],
        default=SplitStrategy.INFORMED.value,
        help='Split strategy (default: informed)'
    )
    parser.add_argument(
        '--depth',
        type=int,
        default=DEFAULT_REFINE_DEPTH,
        help=f'Verifier bisection depth (default: {DEFAULT_REFINE_DEPTH})'
    )
    parser.add_argument(
        '--initial',
        choices=['adaptive', 'uniform'],
        default='adaptive',
        help='Initial partition (default: adaptive)'
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='cellcheck',
        description='Overapproximated reach probabilities for neural network controllers'
    )
    parser.add_argument(
        '--version', '-V',
        action='version',
        version=f'cellcheck {__version__}'
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('--verbose', '-v', action='store_true', help='Debug logging')
    verbosity.add_argument('--quiet', '-q', action='store_true', help='Warnings only')
    parser.add_argument(
        '--threads',
        type=int,
        default=os.cpu_count() or 1,
        help='Worker threads (default: number of CPUs)'
    )
    parser.add_argument(
        '--seed',
        type=int,
        default=0,
        help='Random seed (default: 0)'
    )

    subparsers = parser.add_subparsers(dest='command', help='Commands')

    # partition command
    partition_parser = subparsers.add_parser('partition', help='Verify a network over a partition')
    _add_net_arg(partition_parser)
    _add_model_args(partition_parser, required=False)
    partition_parser.add_argument(
        '--domain',
        type=parse_domain,
        help='Input box as lo:hi per dimension (default: the model domain)'
    )
    _add_partition_args(partition_parser)
    partition_parser.add_argument('--out', '-o', required=True, help='Partition file (JSON lines)')

    # check command
    check_parser = subparsers.add_parser('check', help='Compute reach probabilities')
    _add_net_arg(check_parser)
    _add_model_args(check_parser)
    _add_partition_args(check_parser)
    check_parser.add_argument(
        '--transition-threshold',
        type=parse_threshold,
        help='Split on transition range above this (default: off)'
    )
    check_parser.add_argument(
        '--action-threshold',
        type=parse_schedule,
        help='Split on action range above this; a value or start:value,... schedule (default: off)'
    )
    check_parser.add_argument('--eps', type=float, help='Convergence tolerance (default: 1e-6)')
    check_parser.add_argument('--max-sweeps', type=int, help='Sweep limit (default: 2000)')
    check_parser.add_argument(
        '--no-refine-unsafe',
        action='store_true',
        help='Do not refine cells straddling the unsafe set'
    )
    check_parser.add_argument('--layered', action='store_true', help='Backward induction over tau layers')
    check_parser.add_argument(
        '--readout',
        type=parse_labels,
        help='Layered: modes whose maximum forms the tau curve (default: all)'
    )
    check_parser.add_argument('--out', '-o', required=True, help='Field file (JSON lines)')
    check_parser.add_argument('--tau-curve', help='Layered: tau curve CSV')

    # mc command
    mc_parser = subparsers.add_parser('mc', help='Monte Carlo estimates of reach probabilities')
    _add_net_arg(mc_parser)
    _add_model_args(mc_parser)
    starts = mc_parser.add_mutually_exclusive_group(required=True)
    starts.add_argument('--starts', help='CSV of start states (state columns, optional mode)')
    starts.add_argument('--field', help='Field file whose cells provide start states')
    mc_parser.add_argument('--per-cell', type=int, default=5, help='Starts per cell (default: 5)')
    mc_parser.add_argument('--n', type=int, default=1000, help='Rollouts per start (default: 1000)')
    mc_parser.add_argument(
        '--horizon',
        type=int,
        default=DEFAULT_HORIZON,
        help=f'Steps per rollout (default: {DEFAULT_HORIZON})'
    )
    mc_parser.add_argument('--out', '-o', required=True, help='Estimates CSV')

    # exact command
    exact_parser = subparsers.add_parser('exact', help='Exact check of a lookup table')
    exact_parser.add_argument('--table', required=True, help='Table file from tabulate')
    _add_model_args(exact_parser)
    exact_parser.add_argument(
        '--eps',
        dest='exact_eps',
        type=float,
        default=DEFAULT_EXACT_EPS,
        help='Value iteration tolerance (default: 1e-12)'
    )
    exact_parser.add_argument('--out', '-o', required=True, help='Exact result file')

    # compare command
    compare_parser = subparsers.add_parser('compare', help='Join checker, Monte Carlo and exact outputs')
    compare_parser.add_argument('--field', required=True, help='Field file from check')
    compare_parser.add_argument('--mc', required=True, help='Estimates CSV from mc')
    compare_parser.add_argument('--exact', help='Exact result file')
    compare_parser.add_argument('--out', '-o', required=True, help='Comparison CSV')

    # tabulate command
    tabulate_parser = subparsers.add_parser('tabulate', help='Tabulate a network at grid nodes')
    _add_net_arg(tabulate_parser)
    _add_model_args(tabulate_parser)
    tabulate_parser.add_argument(
        '--grid',
        type=parse_counts,
        required=True,
        help='Cell-centre nodes per dimension, e.g. 20,20'
    )
    tabulate_parser.add_argument('--out', '-o', required=True, help='Table file')

    return parser


def _configure_logging(args: argparse.Namespace) -> None:
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(
        level=level,
        format='%(levelname)s %(name)s: %(message)s',
        stream=sys.stderr,
    )
    logging.getLogger('cellcheck').setLevel(level)


def run(argv: Optional[List[str]] = None) -> int:
    """
    Run the command line and return its exit code.

    Exit codes: 0 success, 1 I/O error, 2 usage error, 3 invalid input.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    if not args.command:
        parser.print_help()
        return EXIT_OK

    _configure_logging(args)
    commands = {
        'partition': cmd_partition,
        'check': cmd_check,
        'mc': cmd_mc,
        'exact': cmd_exact,
        'compare': cmd_compare,
        'tabulate': cmd_tabulate,
    }
    try:
        config = RunConfig.from_args(args)
        commands[args.command](config)
        config.write_manifest(config.outputs.get('out'))
    except OSError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_IO
    except (CellCheckError, ValueError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def main() -> None:
    """Main CLI entry point."""
    sys.exit(run())


def cmd_partition(config: RunConfig) -> None:
    """Execute partition command."""
    net = config.load_networks()
    if isinstance(net, list):
        raise ConfigError("partition takes a single network")
    model = None
    if 'domain' in config.params:
        lows, highs = config.params['domain']
    elif config.model is not None:
        model = config.build_model()
        lows, highs = model.lows, model.highs
    else:
        raise ConfigError("partition needs --domain or --model")

    cfg = config.check
    print(f"Verifying {config.nets[0]} ({cfg.initial_partition}, {cfg.strategy.value})...", file=sys.stderr)
    if cfg.initial_partition == 'uniform':
        tree, vstats = uniform_verify(net, lows, highs, cfg.min_size, cfg.depth)
    else:
        tree, vstats = adaptive_verify(net, lows, highs, cfg.min_size, cfg.strategy, cfg.depth)

    stats = CheckStats(verifier_calls=vstats.verifier_calls, leaves_initial=len(tree),
                       leaves_before_final_splits=len(tree), leaves_final=len(tree),
                       wall_time=vstats.wall_time, verification=vstats)
    field = ProbField(model, [tree], stats, sweeps=0, converged=False)
    state_labels = model.state_labels if model is not None else ()
    FieldExporter(net.action_labels, state_labels).save(
        field, config.outputs['out'], kind='partition', extra={'config': config.check.to_dict()})

    print(f"Leaves: {vstats.leaves_total} ({vstats.leaves_singleton} single-action, "
          f"{vstats.leaves_multi} multi-action)")
    print(f"Verifier calls: {vstats.verifier_calls}")


def cmd_check(config: RunConfig) -> None:
    """Execute check command."""
    nets = config.load_networks()
    model = config.build_model()
    action_labels = networks_per_mode(nets, model)[0].action_labels

    print(f"Checking {type(model).__name__} with {len(config.nets)} network(s)...", file=sys.stderr)
    if config.params.get('layered'):
        field = check_layered(nets, model, config.check, config.params.get('readout'))
    else:
        if config.params.get('readout'):
            raise ConfigError("--readout applies to layered checking only")
        field = check(nets, model, config.check)

    FieldExporter(action_labels, model.state_labels, model.mode_labels).save(
        field, config.outputs['out'], kind='field', extra={'config': config.check.to_dict()})
    if 'tau_curve' in config.outputs:
        if not field.layered:
            raise ConfigError("--tau-curve needs --layered")
        save_frame(tau_curve_frame(field), config.outputs['tau_curve'])

    print(f"Leaves: {field.num_leaves()}")
    print(f"Sweeps: {field.sweeps}")
    print(f"Converged: {field.converged}")
    print(f"Max probability: {field.max_prob():.6g}")


def _read_starts(path: str, model) -> tuple:
    df = read_frame(path)
    missing = [label for label in model.state_labels if label not in df.columns]
    if missing:
        raise ConfigError(f"{path} lacks state columns {missing}")
    states = df[list(model.state_labels)].to_numpy(dtype=np.float64)
    if 'mode' not in df.columns:
        return states, np.zeros(len(df), dtype=int)
    modes = [m if isinstance(m, (int, np.integer)) else model.mode_index(str(m)) for m in df['mode']]
    return states, np.asarray(modes, dtype=int)


def cmd_mc(config: RunConfig) -> None:
    """Execute mc command."""
    nets = config.load_networks()
    model = config.build_model()
    if 'starts' in config.inputs:
        states, modes = _read_starts(config.inputs['starts'], model)
    else:
        field = read_partition(config.inputs['field'])
        states, modes, _ = start_states(field, config.params['per_cell'], config.seed)

    n, horizon = config.params['n'], config.params['horizon']
    print(f"Simulating {len(states)} starts x {n} rollouts...", file=sys.stderr)
    estimates = []
    for i, (x, mode) in enumerate(zip(states, modes)):
        estimates.append(monte_carlo(nets, model, x, n, horizon, config.seed, int(mode), start_index=i))
        if (i + 1) % 100 == 0:
            print(f"  {i + 1} starts...", file=sys.stderr)

    save_frame(mc_frame(states, modes, estimates, model.state_labels), config.outputs['out'])
    print(f"Max estimate: {max(e.estimate for e in estimates):.6g}")


def cmd_exact(config: RunConfig) -> None:
    """Execute exact command."""
    policy, _, header = read_table(config.inputs['table'])
    model = config.build_model()
    result = exact_check(policy, model, config.params['exact_eps'])
    write_table(policy, config.outputs['out'], model.state_labels, model.mode_labels, exact=result)
    print(f"Iterations: {result.iterations}")
    print(f"Max probability: {float(result.values.max()):.6g}")


def cmd_compare(config: RunConfig) -> None:
    """Execute compare command."""
    field = read_partition(config.inputs['field'])
    labels = read_header(config.inputs['field'])['state_labels']
    df = read_frame(config.inputs['mc'])
    missing = [label for label in labels if label not in df.columns]
    if missing:
        raise ConfigError(f"{config.inputs['mc']} lacks state columns {missing}")
    states = df[labels].to_numpy(dtype=np.float64)
    modes = df['mode'].to_numpy(dtype=int) if 'mode' in df.columns else np.zeros(len(df), dtype=int)

    p_check = [field.prob_at(x, int(m)) for x, m in zip(states, modes)]
    estimates = [MonteCarloEstimate(p, s, int(k), int(round(p * k)))
                 for p, s, k in zip(df['p_mc'], df['stderr'], df['n'])]
    p_exact = p_interp = None
    if 'exact' in config.inputs:
        _, exact, _ = read_table(config.inputs['exact'])
        if exact is None:
            raise ConfigError(f"{config.inputs['exact']} holds no exact probabilities")
        p_exact = [float(exact.value_at(x, int(m))[0]) for x, m in zip(states, modes)]
        p_interp = [float(exact.interpolate(x, int(m))[0]) for x, m in zip(states, modes)]

    result = compare_frame(states, modes, p_check, estimates, labels,
                           p_exact=p_exact, p_exact_interp=p_interp)
    save_frame(result, config.outputs['out'])
    print(f"Rows: {len(result)}")
    print(f"Bound violations: {int((~result['bound_ok']).sum())}")


def cmd_tabulate(config: RunConfig) -> None:
    """Execute tabulate command."""
    model = config.build_model()
    nets = networks_per_mode(config.load_networks(), model)
    grid = config.params['grid']
    if len(grid) != model.state_dim:
        raise ConfigError(f"--grid needs {model.state_dim} counts")
    policy = TabularPolicy.from_network(nets, cell_centers(model.lows, model.highs, grid))
    write_table(policy, config.outputs['out'], model.state_labels, model.mode_labels)
    print(f"Nodes: {policy.num_nodes} x {policy.num_modes} modes")


if __name__ == '__main__':
    main()
