#!/usr/bin/env python3
"""
Example script comparing uniform and adaptive checking on the continuum world.

Usage:
    python run.py [--min-size SIZE] [--threshold T] [--output FILE]

Example:
    python run.py --min-size 0.5 --threshold 0.05 --output field.jsonl
"""

import argparse
import sys

import cellcheck
from cellcheck import CheckConfig, ContinuumWorld, FieldExporter, check, uniform_verify
from cellcheck.baseline import monte_carlo


def main():
    parser = argparse.ArgumentParser(
        description='Check the shipped continuum-world controller'
    )
    parser.add_argument(
        '--min-size', '-s',
        type=float,
        default=0.5,
        help='Minimum cell width in both dimensions (default: 0.5)'
    )
    parser.add_argument(
        '--threshold', '-t',
        type=float,
        default=0.05,
        help='Transition and action threshold (default: 0.05)'
    )
    parser.add_argument(
        '--rollouts', '-n',
        type=int,
        default=500,
        help='Monte Carlo rollouts per spot check (default: 500)'
    )
    parser.add_argument(
        '--output', '-o',
        default='field.jsonl',
        help='Output field file (default: field.jsonl)'
    )

    args = parser.parse_args()

    if args.min_size <= 0:
        print("Error: --min-size must be positive.")
        sys.exit(1)

    net = cellcheck.shipped_network('continuum')
    world = ContinuumWorld()
    min_size = [args.min_size, args.min_size]

    # Verification cost
    uniform_tree, uniform_stats = uniform_verify(net, world.lows, world.highs, min_size)
    adaptive_tree, adaptive_stats = cellcheck.verify(net, world.lows, world.highs, min_size)
    print(f"Uniform:  {len(uniform_tree)} cells, {uniform_stats.verifier_calls} verifier calls")
    print(f"Adaptive: {len(adaptive_tree)} cells, {adaptive_stats.verifier_calls} verifier calls")

    # Reach probabilities without and with online splitting
    plain = check(net, world, CheckConfig(min_size=min_size))
    refined = check(net, world, CheckConfig(
        min_size=min_size,
        transition_threshold=args.threshold,
        action_threshold=args.threshold,
    ))
    print(f"Max probability (no heuristics): {plain.max_prob():.4f} over {plain.num_leaves()} cells")
    print(f"Max probability (heuristics):    {refined.max_prob():.4f} over {refined.num_leaves()} cells")
    print(f"Splits: {refined.stats.transition_splits} transition, {refined.stats.action_splits} action")

    # Spot checks: the bound should sit above the simulated estimate
    for index, start in enumerate([(2.0, 2.0), (5.0, 15.0), (15.0, 5.0)]):
        estimate = monte_carlo(net, world, start, n=args.rollouts, seed=0, start_index=index)
        bound = refined.prob_at(start)
        print(f"  start {start}: bound {bound:.4f}, simulated {estimate.estimate:.4f} "
              f"+/- {estimate.stderr:.4f}")

    FieldExporter(net.action_labels, world.state_labels).save(refined, args.output)
    print(f"Saved {refined.num_leaves()} cells to {args.output}")


if __name__ == '__main__':
    main()
