"""
Parsers for command-line values.
"""

import math
from typing import Dict, List, Optional, Tuple, Union

DISABLED = ('none', 'inf', 'off')


def parse_vector(text: str) -> List[float]:
    """
    Parse a comma-separated list of numbers.

    >>> parse_vector('0.5, 1,2')
    [0.5, 1.0, 2.0]
    """
    parts = [p.strip() for p in text.split(',') if p.strip()]
    if not parts:
        raise ValueError(f"expected comma-separated numbers, got {text!r}")
    values = [float(p) for p in parts]
    if not all(math.isfinite(v) for v in values):
        raise ValueError(f"values must be finite, got {text!r}")
    return values


def parse_counts(text: str) -> List[int]:
    """Comma-separated positive integers (grid node counts)."""
    counts = [int(p) for p in text.split(',') if p.strip()]
    if not counts or any(n < 1 for n in counts):
        raise ValueError(f"expected positive integers, got {text!r}")
    return counts


def parse_threshold(text: str) -> Optional[float]:
    """
    A non-negative threshold, or None for 'none'/'inf'/'off'.

    >>> parse_threshold('0.005'), parse_threshold('inf')
    (0.005, None)
    """
    if text.strip().lower() in DISABLED:
        return None
    value = float(text)
    if not math.isfinite(value) or value < 0:
        raise ValueError(f"threshold must be finite and >= 0, got {text!r}")
    return value


def parse_schedule(text: str) -> Union[None, float, List[Tuple[int, float]]]:
    """
    An action-threshold schedule.

    Either a single threshold, or 'start:value' pairs switching the value at
    each start sweep (or tau layer):

    >>> parse_schedule('0:0.1,10:0.02')
    [(0, 0.1), (10, 0.02)]
    """
    if ':' not in text:
        return parse_threshold(text)
    steps = []
    for part in text.split(','):
        start, _, value = part.partition(':')
        threshold = parse_threshold(value)
        if threshold is None:
            raise ValueError(f"schedule entries need a numeric value, got {part!r}")
        steps.append((int(start), threshold))
    return steps


def _interval(text: str) -> Tuple[float, float]:
    lo, sep, hi = text.partition(':')
    if not sep:
        raise ValueError(f"expected lo:hi, got {text!r}")
    lo, hi = float(lo), float(hi)
    if not lo < hi:
        raise ValueError(f"interval {text!r} is empty")
    return lo, hi


def parse_domain(text: str) -> Tuple[List[float], List[float]]:
    """
    Box domain as per-dimension 'lo:hi' intervals.

    >>> parse_domain('0:20,0:20')
    ([0.0, 0.0], [20.0, 20.0])
    """
    bounds = [_interval(p.strip()) for p in text.split(',') if p.strip()]
    if not bounds:
        raise ValueError("empty domain")
    return [b[0] for b in bounds], [b[1] for b in bounds]


def parse_assignments(text: str) -> Dict[str, float]:
    """
    'name=value' pairs, e.g. fixed vertical rates.

    >>> parse_assignments('vown=0,vint=-10')
    {'vown': 0.0, 'vint': -10.0}
    """
    result = {}
    for part in text.split(','):
        name, sep, value = part.partition('=')
        if not sep or not name.strip():
            raise ValueError(f"expected name=value, got {part!r}")
        result[name.strip()] = float(value)
    return result


def parse_ranges(text: str) -> Dict[str, Tuple[float, float]]:
    """
    'name=lo:hi' pairs overriding coordinate ranges.

    >>> parse_ranges('tau=0:20')
    {'tau': (0.0, 20.0)}
    """
    result = {}
    for part in text.split(','):
        name, sep, interval = part.partition('=')
        if not sep or not name.strip():
            raise ValueError(f"expected name=lo:hi, got {part!r}")
        result[name.strip()] = _interval(interval)
    return result


def parse_labels(text: str) -> List[str]:
    labels = [p.strip() for p in text.split(',') if p.strip()]
    if not labels:
        raise ValueError("expected at least one label")
    return labels
