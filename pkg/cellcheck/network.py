"""
ReLU feed-forward policy networks.

Networks are stored in a plain-text, line-oriented format ('#' starts a
comment line):

    line 1: L, the number of layers (hidden + output, input excluded)
    line 2: L+1 layer sizes, input first
    line 3: action labels, one per output
    line 4: 'argmax' or 'argmin'
    then for each layer: one line of weights per output unit, followed by a
    line of biases.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import (
    DimensionError,
    DimensionTooLargeError,
    NetworkFormatError,
    NonFiniteWeightError,
    ShapeMismatchError,
)

logger = logging.getLogger(__name__)

SELECTION_RULES = ('argmax', 'argmin')

# Corner evaluation enumerates 2**d points
MAX_CORNER_DIM = 16


@dataclass(frozen=True, eq=False)
class Network:
    """
    Immutable ReLU network mapping controller inputs to per-action scores.

    Hidden layers use ReLU, the output layer is affine. The selected action is
    the argmax (or argmin) of the output scores, ties going to the lowest index.

    Example:
        >>> net = load_network('continuum.net')
        >>> net.best_action([3.0, 1.0])
        3
        >>> net.action_labels[3]
        'right'
    """
    layer_sizes: Tuple[int, ...]
    weights: Tuple[np.ndarray, ...] = field(repr=False)
    biases: Tuple[np.ndarray, ...] = field(repr=False)
    action_labels: Tuple[str, ...]
    selection_rule: str = 'argmax'

    def __post_init__(self) -> None:
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, 'layer_sizes', sizes)
        object.__setattr__(self, 'action_labels', tuple(self.action_labels))

        if len(sizes) < 3:
            raise ShapeMismatchError("at least one hidden layer is required")
        if any(s <= 0 for s in sizes):
            raise ShapeMismatchError(f"layer sizes must be positive, got {list(sizes)}")
        if sizes[-1] < 2:
            raise ShapeMismatchError("output dimension must be at least 2")
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise ShapeMismatchError(
                f"expected {len(sizes) - 1} weight matrices and bias vectors"
            )
        if self.selection_rule not in SELECTION_RULES:
            raise ValueError(
                f"selection_rule must be one of {SELECTION_RULES}, got {self.selection_rule!r}"
            )
        if len(self.action_labels) != sizes[-1]:
            raise ShapeMismatchError(
                f"{len(self.action_labels)} action labels for {sizes[-1]} outputs"
            )
        if len(set(self.action_labels)) != len(self.action_labels):
            raise NetworkFormatError(f"action labels must be unique: {list(self.action_labels)}")

        weights = []
        biases = []
        for k, (w, b) in enumerate(zip(self.weights, self.biases), start=1):
            w = np.array(w, dtype=np.float64)
            b = np.array(b, dtype=np.float64).reshape(-1)
            if w.shape != (sizes[k], sizes[k - 1]):
                raise ShapeMismatchError(
                    f"weight shape {w.shape}, expected {(sizes[k], sizes[k - 1])}",
                    layer=k,
                )
            if b.shape != (sizes[k],):
                raise ShapeMismatchError(
                    f"bias length {b.shape[0]}, expected {sizes[k]}", layer=k
                )
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise NonFiniteWeightError(f"layer {k} contains non-finite values")
            w.flags.writeable = False
            b.flags.writeable = False
            weights.append(w)
            biases.append(b)
        object.__setattr__(self, 'weights', tuple(weights))
        object.__setattr__(self, 'biases', tuple(biases))

    # ==================== Shape ====================

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_dim(self) -> int:
        return self.layer_sizes[-1]

    @property
    def num_layers(self) -> int:
        """Number of affine layers (hidden + output)."""
        return len(self.layer_sizes) - 1

    def _check_input(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1:] != (self.input_dim,):
            raise DimensionError(
                f"input has dimension {x.shape[-1] if x.ndim else 0}, "
                f"network expects {self.input_dim}"
            )
        return x

    # ==================== Evaluation ====================

    def evaluate(self, x: Sequence[float]) -> np.ndarray:
        """
        Raw output scores for a single input vector.

        Raises:
            DimensionError: If len(x) differs from the input dimension
        """
        z = self._check_input(x)
        if z.ndim != 1:
            raise DimensionError("evaluate expects a single vector; use evaluate_batch")
        return self.evaluate_batch(z[None, :])[0]

    def evaluate_batch(self, xs) -> np.ndarray:
        """Scores for a (N, input_dim) batch of inputs, shape (N, output_dim)."""
        z = self._check_input(xs)
        if z.ndim != 2:
            raise DimensionError("evaluate_batch expects a 2-D array")
        last = self.num_layers - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = z @ w.T + b
            if k < last:
                z = np.maximum(z, 0.0)
        return z

    def select(self, scores: np.ndarray) -> np.ndarray:
        """Apply the selection rule along the last axis (first index on ties)."""
        if self.selection_rule == 'argmax':
            return np.argmax(scores, axis=-1)
        return np.argmin(scores, axis=-1)

    def best_action(self, x: Sequence[float]) -> int:
        """Index of the selected action at x."""
        return int(self.select(self.evaluate(x)))

    def best_action_batch(self, xs) -> np.ndarray:
        """Selected action index for every row of a batch."""
        return self.select(self.evaluate_batch(xs))

    def evaluate_corners(self, lows: Sequence[float], highs: Sequence[float]) -> np.ndarray:
        """
        Selected action at each of the 2**d corners of a box.

        Corner i takes highs[k] where bit k of i is set and lows[k] otherwise,
        so dimension 0 varies fastest.

        Raises:
            DimensionTooLargeError: If d exceeds MAX_CORNER_DIM
        """
        lows = np.asarray(lows, dtype=np.float64)
        highs = np.asarray(highs, dtype=np.float64)
        d = lows.shape[0]
        if d > MAX_CORNER_DIM:
            raise DimensionTooLargeError(
                f"corner evaluation needs 2**{d} points (limit 2**{MAX_CORNER_DIM})"
            )
        if d != self.input_dim or highs.shape != lows.shape:
            raise DimensionError(f"cell has dimension {d}, network expects {self.input_dim}")
        return self.best_action_batch(corner_points(lows, highs))

    # ==================== Derived networks ====================

    def restrict(self, fixed: Dict[int, float]) -> 'Network':
        """
        Network over the remaining inputs with some inputs held constant.

        The fixed inputs are folded into the first-layer bias, so the result
        computes exactly the same scores on the slice.
        """
        if not fixed:
            return self
        bad = [i for i in fixed if not 0 <= i < self.input_dim]
        if bad:
            raise DimensionError(f"cannot fix inputs {bad} of a {self.input_dim}-input network")
        free = [i for i in range(self.input_dim) if i not in fixed]
        if not free:
            raise DimensionError("at least one input must remain free")

        w0 = self.weights[0]
        idx = np.array(sorted(fixed), dtype=int)
        vals = np.array([fixed[i] for i in sorted(fixed)], dtype=np.float64)
        bias0 = self.biases[0] + w0[:, idx] @ vals
        return Network(
            layer_sizes=(len(free),) + self.layer_sizes[1:],
            weights=(w0[:, free],) + self.weights[1:],
            biases=(bias0,) + self.biases[1:],
            action_labels=self.action_labels,
            selection_rule=self.selection_rule,
        )

    def action_index(self, label: str) -> int:
        try:
            return self.action_labels.index(label)
        except ValueError:
            raise KeyError(f"unknown action label {label!r}") from None


def corner_points(lows: np.ndarray, highs: np.ndarray) -> np.ndarray:
    """All 2**d corners of a box in lexicographic order (dimension 0 fastest)."""
    d = lows.shape[0]
    idx = np.arange(1 << d)
    bits = (idx[:, None] >> np.arange(d)) & 1
    return np.where(bits == 1, highs, lows)


# ==================== Text format ====================

class NetworkParser:
    """
    Parser for the line-oriented network format.

    Tracks original line numbers so every error points at the offending line.

    Example:
        >>> net = NetworkParser().parse(open('continuum.net').read())
    """

    def _content_lines(self, text: str) -> Iterator[Tuple[int, str]]:
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if line and not line.startswith('#'):
                yield lineno, line

    def _ints(self, lineno: int, line: str) -> List[int]:
        try:
            return [int(tok) for tok in line.split()]
        except ValueError:
            raise NetworkFormatError(f"expected integers, got {line!r}", line=lineno) from None

    def _floats(self, lineno: int, line: str) -> List[float]:
        values = []
        for tok in line.split():
            try:
                value = float(tok)
            except ValueError:
                raise NetworkFormatError(f"invalid number {tok!r}", line=lineno) from None
            if not math.isfinite(value):
                raise NonFiniteWeightError(f"non-finite value {tok!r}", line=lineno)
            values.append(value)
        return values

    def parse(self, text: str) -> Network:
        """
        Parse network text.

        Raises:
            NetworkFormatError: On malformed lines or a truncated file
            ShapeMismatchError: If a row length disagrees with the layer sizes
            NonFiniteWeightError: If a weight or bias is NaN or infinite
        """
        lines = self._content_lines(text)
        last_line = 0

        def next_line() -> Tuple[int, str]:
            nonlocal last_line
            try:
                lineno, line = next(lines)
            except StopIteration:
                raise NetworkFormatError("unexpected end of file", line=last_line + 1) from None
            last_line = lineno
            return lineno, line

        lineno, line = next_line()
        counts = self._ints(lineno, line)
        if len(counts) != 1 or counts[0] < 2:
            raise NetworkFormatError(
                "first line must hold the layer count (at least 2)", line=lineno
            )
        num_layers = counts[0]

        lineno, line = next_line()
        sizes = self._ints(lineno, line)
        if len(sizes) != num_layers + 1:
            raise ShapeMismatchError(
                f"{len(sizes)} layer sizes for {num_layers} layers", line=lineno
            )
        if any(s <= 0 for s in sizes):
            raise ShapeMismatchError("layer sizes must be positive", line=lineno)

        lineno, line = next_line()
        labels = line.split()
        if len(labels) != sizes[-1]:
            raise ShapeMismatchError(
                f"{len(labels)} action labels for {sizes[-1]} outputs", line=lineno
            )
        duplicates = sorted({label for label in labels if labels.count(label) > 1})
        if duplicates:
            raise NetworkFormatError(f"duplicate action labels {duplicates}", line=lineno)

        lineno, line = next_line()
        rule = line.lower()
        if rule not in SELECTION_RULES:
            raise NetworkFormatError(
                f"selection rule must be argmax or argmin, got {line!r}", line=lineno
            )

        weights = []
        biases = []
        for k in range(1, num_layers + 1):
            rows = []
            for _ in range(sizes[k]):
                lineno, line = next_line()
                row = self._floats(lineno, line)
                if len(row) != sizes[k - 1]:
                    raise ShapeMismatchError(
                        f"weight row has {len(row)} entries, expected {sizes[k - 1]}",
                        layer=k, line=lineno,
                    )
                rows.append(row)
            lineno, line = next_line()
            bias = self._floats(lineno, line)
            if len(bias) != sizes[k]:
                raise ShapeMismatchError(
                    f"bias line has {len(bias)} entries, expected {sizes[k]}",
                    layer=k, line=lineno,
                )
            weights.append(np.array(rows, dtype=np.float64))
            biases.append(np.array(bias, dtype=np.float64))

        for lineno, _ in lines:
            raise NetworkFormatError("unexpected trailing content", line=lineno)

        return Network(
            layer_sizes=tuple(sizes),
            weights=tuple(weights),
            biases=tuple(biases),
            action_labels=tuple(labels),
            selection_rule=rule,
        )


def load_network(path: str) -> Network:
    """
    Load and validate a network file.

    Raises:
        OSError: If the file cannot be read
        NetworkFormatError: If the content is malformed
    """
    with open(path, 'r', encoding='utf-8') as f:
        net = NetworkParser().parse(f.read())
    logger.debug("Loaded network %s with layers %s", path, list(net.layer_sizes))
    return net


def save_network(net: Network, path: str, comment: Optional[str] = None) -> None:
    """Write a network in the text format (shortest round-trip float repr)."""
    out = []
    if comment:
        out.extend(f"# {c}" for c in comment.splitlines())
    out.append(str(net.num_layers))
    out.append(' '.join(str(s) for s in net.layer_sizes))
    out.append(' '.join(net.action_labels))
    out.append(net.selection_rule)
    for w, b in zip(net.weights, net.biases):
        for row in w:
            out.append(' '.join(repr(float(v)) for v in row))
        out.append(' '.join(repr(float(v)) for v in b))
    with open(path, 'w', encoding='utf-8') as f:
        f.write('\n'.join(out) + '\n')
