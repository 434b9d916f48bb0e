"""
JSON-lines export of partitions, probability fields and lookup tables.

Every file starts with a header record carrying the format version, followed
by one record per leaf (or per table row) and, for fields, a closing stats
record. Floats are written in their shortest round-trip form, so reading a
file back reproduces the exact cell bounds.
"""

import json
import logging
from typing import Any, Dict, Iterator, List, Optional, Sequence, TextIO, Tuple

import numpy as np

from ..adaptive import VerifierStats
from ..baseline import ExactResult, TabularPolicy
from ..checker import CheckStats, ProbField
from ..exceptions import ExportFormatError
from ..partition import Cell, PartitionTree
from ..verifier import indices_from_mask, mask_from_indices

logger = logging.getLogger(__name__)

FORMAT_VERSION = 'cellcheck-v1'


class FieldExporter:
    """
    Write partitions and probability fields as JSON lines.

    Example:
        >>> exporter = FieldExporter(net.action_labels, model.state_labels)
        >>> exporter.save(field, 'field.jsonl', kind='field')
    """

    def __init__(self, action_labels: Sequence[str], state_labels: Sequence[str] = (),
                 mode_labels: Sequence[str] = ('default',)) -> None:
        self.action_labels = tuple(action_labels)
        self.state_labels = tuple(state_labels)
        self.mode_labels = tuple(mode_labels)

    def header(self, field: ProbField, kind: str, extra: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        tree = field.trees[0]
        header = {
            'type': 'header',
            'format': FORMAT_VERSION,
            'kind': kind,
            'dim': tree.dim,
            'lows': tree.root.lows.tolist(),
            'highs': tree.root.highs.tolist(),
            'state_labels': list(self.state_labels),
            'action_labels': list(self.action_labels),
            'mode_labels': list(self.mode_labels),
            'layered': field.layered,
            'tau_index': field.tau_index,
            'converged': field.converged,
            'sweeps': field.sweeps,
        }
        if field.model is not None:
            header['model'] = field.model.describe()
        if extra:
            header.update(extra)
        return header

    def export_cell(self, cell: Cell, mode: int = 0, layer: Optional[int] = None) -> Dict[str, Any]:
        record = {
            'type': 'cell',
            'id': cell.id,
            'mode': mode,
            'lows': cell.lows.tolist(),
            'highs': cell.highs.tolist(),
            'actions': [self.action_labels[i] for i in indices_from_mask(cell.action_set)],
            'prob': cell.prob,
            'in_unsafe': cell.in_unsafe,
            'absorbing': cell.absorbing,
        }
        if layer is not None:
            record['layer'] = layer
        if cell.per_action_prob:
            record['per_action'] = {self.action_labels[a]: p for a, p in sorted(cell.per_action_prob.items())}
        return record

    def records(self, field: ProbField, kind: str = 'field',
                extra: Optional[Dict[str, Any]] = None) -> Iterator[Dict[str, Any]]:
        yield self.header(field, kind, extra)
        for mode, layer, cell in field.iter_cells():
            yield self.export_cell(cell, mode, layer)
        yield {'type': 'stats', **field.stats.to_dict()}

    def write(self, field: ProbField, stream: TextIO, kind: str = 'field',
              extra: Optional[Dict[str, Any]] = None) -> int:
        count = 0
        for record in self.records(field, kind, extra):
            stream.write(json.dumps(record) + '\n')
            count += 1
        return count

    def save(self, field: ProbField, filepath: str, kind: str = 'field',
             extra: Optional[Dict[str, Any]] = None) -> None:
        with open(filepath, 'w', encoding='utf-8') as f:
            count = self.write(field, f, kind, extra)
        logger.info("Wrote %d records to %s", count, filepath)


def _read_records(filepath: str) -> Tuple[Dict[str, Any], List[Dict[str, Any]]]:
    with open(filepath, encoding='utf-8') as f:
        lines = [line for line in f if line.strip()]
    if not lines:
        raise ExportFormatError(f"{filepath} is empty")
    try:
        records = [json.loads(line) for line in lines]
    except json.JSONDecodeError as e:
        raise ExportFormatError(f"{filepath}: invalid JSON ({e})") from e
    header = records[0]
    if header.get('type') != 'header' or header.get('format') != FORMAT_VERSION:
        raise ExportFormatError(f"{filepath} has no {FORMAT_VERSION} header")
    return header, records[1:]


def read_partition(filepath: str) -> ProbField:
    """
    Rebuild the partition trees (and probabilities) of an exported field.

    Leaf geometry, ids, action sets and probabilities are restored exactly;
    the model is not, so the returned field has model None.
    """
    header, records = _read_records(filepath)
    labels = header['action_labels']
    lows, highs = header['lows'], header['highs']
    groups: Dict[Tuple[int, Optional[int]], List[Cell]] = {}
    stats = CheckStats()
    for record in records:
        if record.get('type') == 'stats':
            data = {k: v for k, v in record.items() if k != 'type'}
            verification = VerifierStats(**data.pop('verification', {}))
            stats = CheckStats(verification=verification, **data)
            continue
        if record.get('type') != 'cell':
            continue
        try:
            actions = mask_from_indices(labels.index(a) for a in record['actions'])
        except ValueError as e:
            raise ExportFormatError(f"unknown action in cell {record.get('id')}: {e}") from e
        per_action = record.get('per_action')
        cell = Cell(
            id=int(record['id']),
            lows=np.asarray(record['lows'], dtype=np.float64),
            highs=np.asarray(record['highs'], dtype=np.float64),
            action_set=actions,
            candidates=actions,
            prob=float(record.get('prob', 0.0)),
            in_unsafe=bool(record.get('in_unsafe', False)),
            absorbing=bool(record.get('absorbing', False)),
            per_action_prob=None if per_action is None else {labels.index(a): p for a, p in per_action.items()},
        )
        groups.setdefault((int(record['mode']), record.get('layer')), []).append(cell)

    num_modes = len(header.get('mode_labels') or ['default'])
    if header.get('layered'):
        num_layers = max(layer for _, layer in groups) + 1
        layers = [[PartitionTree.from_leaves(lows, highs, groups.get((m, k), []))
                   for m in range(num_modes)] for k in range(num_layers)]
        trees = layers[-1]
    else:
        layers = None
        trees = [PartitionTree.from_leaves(lows, highs, groups.get((m, None), []))
                 for m in range(num_modes)]
    return ProbField(None, trees, stats, layers=layers, tau_index=header.get('tau_index'),
                     sweeps=header.get('sweeps', 0), converged=header.get('converged', False))


def read_header(filepath: str) -> Dict[str, Any]:
    with open(filepath, encoding='utf-8') as f:
        first = f.readline()
    try:
        header = json.loads(first)
    except json.JSONDecodeError as e:
        raise ExportFormatError(f"{filepath}: invalid header ({e})") from e
    if header.get('format') != FORMAT_VERSION:
        raise ExportFormatError(f"{filepath} has no {FORMAT_VERSION} header")
    return header


# ==================== Lookup tables and exact results ====================

def write_table(policy: TabularPolicy, filepath: str, state_labels: Sequence[str] = (),
                mode_labels: Sequence[str] = ('default',), exact: Optional[ExactResult] = None) -> None:
    """Write a lookup table, and optionally its exact probabilities, one record per mode."""
    kind = 'table' if exact is None else 'exact'
    with open(filepath, 'w', encoding='utf-8') as f:
        f.write(json.dumps({
            'type': 'header',
            'format': FORMAT_VERSION,
            'kind': kind,
            'grid': [axis.tolist() for axis in policy.grid],
            'state_labels': list(state_labels),
            'action_labels': list(policy.action_labels),
            'mode_labels': list(mode_labels),
            'iterations': None if exact is None else exact.iterations,
        }) + '\n')
        for m in range(policy.num_modes):
            record = {
                'type': 'table',
                'mode': m,
                'actions': [policy.action_labels[a] for a in policy.actions[m].ravel()],
            }
            if exact is not None:
                record['probs'] = exact.values[m].ravel().tolist()
            f.write(json.dumps(record) + '\n')
    logger.info("Wrote %s with %d nodes per mode to %s", kind, policy.num_nodes, filepath)


def read_table(filepath: str) -> Tuple[TabularPolicy, Optional[ExactResult], Dict[str, Any]]:
    """
    Read a lookup table written by write_table.

    Returns:
        (policy, exact result or None, header)
    """
    header, records = _read_records(filepath)
    if header.get('kind') not in ('table', 'exact'):
        raise ExportFormatError(f"{filepath} holds a {header.get('kind')!r}, not a lookup table")
    labels = header['action_labels']
    grid = [np.asarray(axis, dtype=np.float64) for axis in header['grid']]
    shape = tuple(len(axis) for axis in grid)
    rows = sorted((r for r in records if r.get('type') == 'table'), key=lambda r: r['mode'])
    if not rows:
        raise ExportFormatError(f"{filepath} has no table records")
    try:
        actions = np.array([[labels.index(a) for a in r['actions']] for r in rows]).reshape((len(rows),) + shape)
    except ValueError as e:
        raise ExportFormatError(f"{filepath}: bad table record ({e})") from e
    policy = TabularPolicy(grid, actions, labels)
    exact = None
    if header['kind'] == 'exact':
        values = np.array([r['probs'] for r in rows], dtype=np.float64).reshape((len(rows),) + shape)
        exact = ExactResult(policy, values, int(header.get('iterations') or 0))
    return policy, exact, header
