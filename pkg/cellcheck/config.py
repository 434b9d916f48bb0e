"""
Run configuration and the per-run manifest.
"""

import argparse
import json
import logging
import os
from dataclasses import dataclass, field, fields
from typing import Any, Dict, List, Optional, Union

from .checker import DEFAULT_EPS, DEFAULT_MAX_SWEEPS, CheckConfig
from .dynamics import MODELS, DynamicsModel, get_model
from .exceptions import ConfigError
from .exporters.jsonl import FORMAT_VERSION
from .network import Network, load_network

logger = logging.getLogger(__name__)

COMMANDS = ('partition', 'check', 'mc', 'exact', 'compare', 'tabulate')
MANIFEST_NAME = 'run.json'


@dataclass
class RunConfig:
    """
    Fully resolved settings of one CLI invocation.

    Attributes:
        command: Subcommand name
        model: Model name ('continuum' or 'vcas'), None for model-free commands
        model_options: Model constructor arguments
        nets: Network file paths (one, or one per mode)
        seed: Seed of every randomized step
        threads: Worker threads
        outputs: Output paths by role ('out', 'tau_curve', ...)
        inputs: Input paths by role ('field', 'mc', 'table', ...)
        params: Command-specific settings (rollouts, horizon, grid, ...)
        check: Checker settings (check and partition commands)
    """
    command: str
    model: Optional[str] = None
    model_options: Dict[str, Any] = field(default_factory=dict)
    nets: List[str] = field(default_factory=list)
    seed: int = 0
    threads: int = 1
    outputs: Dict[str, str] = field(default_factory=dict)
    inputs: Dict[str, str] = field(default_factory=dict)
    params: Dict[str, Any] = field(default_factory=dict)
    check: Optional[CheckConfig] = None

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.model is not None and self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; available: {list(MODELS)}")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        if self.model == 'vcas' and len(self.nets) > 1:
            modes = self.model_options.get('modes')
            expected = len(modes) if modes else len(MODELS['vcas'].action_labels)
            if len(self.nets) != expected:
                raise ConfigError(f"vcas needs one network, or one per previous advisory ({expected}); "
                                  f"got {len(self.nets)}")

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> 'RunConfig':
        """Resolve a parsed command line into a configuration."""
        options: Dict[str, Any] = {}
        if getattr(args, 'boundary', None):
            options['boundary'] = args.boundary
        for name in ('fixed', 'ranges', 'modes'):
            value = getattr(args, name, None)
            if value:
                options[name] = value

        check = None
        if args.command in ('partition', 'check'):
            check = CheckConfig(
                min_size=args.min_size,
                transition_threshold=getattr(args, 'transition_threshold', None),
                action_threshold=getattr(args, 'action_threshold', None),
                convergence_eps=getattr(args, 'eps', None) or DEFAULT_EPS,
                max_sweeps=getattr(args, 'max_sweeps', None) or DEFAULT_MAX_SWEEPS,
                strategy=args.strategy,
                depth=args.depth,
                initial_partition=getattr(args, 'initial', 'adaptive'),
                refine_unsafe=not getattr(args, 'no_refine_unsafe', False),
                threads=args.threads,
            )

        params = {name: getattr(args, name) for name in
                  ('n', 'horizon', 'per_cell', 'grid', 'exact_eps', 'layered', 'readout', 'domain')
                  if getattr(args, name, None) is not None}
        inputs = {name: getattr(args, name) for name in ('field', 'mc', 'exact', 'table', 'starts')
                  if getattr(args, name, None)}
        outputs = {name: getattr(args, name) for name in ('out', 'tau_curve')
                   if getattr(args, name, None)}
        nets = getattr(args, 'net', None) or []
        return cls(
            command=args.command,
            model=getattr(args, 'model', None),
            model_options=options,
            nets=list(nets),
            seed=args.seed,
            threads=args.threads,
            outputs=outputs,
            inputs=inputs,
            params=params,
            check=check,
        )

    def build_model(self) -> DynamicsModel:
        if self.model is None:
            raise ConfigError(f"{self.command} needs a model")
        return get_model(self.model, **self.model_options)

    def load_networks(self) -> Union[Network, List[Network]]:
        if not self.nets:
            raise ConfigError(f"{self.command} needs at least one network")
        nets = [load_network(path) for path in self.nets]
        return nets[0] if len(nets) == 1 else nets

    def to_dict(self) -> Dict[str, Any]:
        from . import __version__
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data['check'] = None if self.check is None else self.check.to_dict()
        data['version'] = __version__
        data['format'] = FORMAT_VERSION
        return data

    def write_manifest(self, output_path: Optional[str] = None) -> str:
        """
        Write run.json beside the primary output (or in the working directory).

        Returns:
            Path of the manifest
        """
        directory = os.path.dirname(os.path.abspath(output_path)) if output_path else os.getcwd()
        path = os.path.join(directory, MANIFEST_NAME)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(self.to_dict(), f, indent=2)
        logger.debug("Wrote manifest %s", path)
        return path
