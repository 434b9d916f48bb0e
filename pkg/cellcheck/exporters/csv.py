"""
Tabular (CSV) views of checker and simulation results, built with pandas.
"""

import logging
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from ..baseline import MonteCarloEstimate
from ..checker import ProbField

logger = logging.getLogger(__name__)

# Estimates more than this many standard errors above the bound are flagged
SOUNDNESS_SIGMAS = 3.0
# Outcome probabilities sum to 1 only up to rounding
PROB_ROUNDING = 1e-12


def tau_curve_frame(field: ProbField) -> pd.DataFrame:
    """Maximum reach probability per tau layer."""
    if field.tau_curve is None:
        raise ValueError("field has no tau curve (not a layered field)")
    return pd.DataFrame(field.tau_curve, columns=['tau', 'max_prob'])


def _state_columns(states: np.ndarray, state_labels: Sequence[str]) -> pd.DataFrame:
    states = np.atleast_2d(np.asarray(states, dtype=np.float64))
    labels = list(state_labels) or [f'x{i}' for i in range(states.shape[1])]
    return pd.DataFrame(states, columns=labels)


def mc_frame(states: np.ndarray, modes: Sequence[int], estimates: Sequence[MonteCarloEstimate],
             state_labels: Sequence[str] = (), mode_labels: Optional[Sequence[str]] = None) -> pd.DataFrame:
    """One row per start state with its Monte Carlo estimate."""
    df = _state_columns(states, state_labels)
    df['mode'] = [mode_labels[m] for m in modes] if mode_labels else list(modes)
    df['p_mc'] = [e.estimate for e in estimates]
    df['stderr'] = [e.stderr for e in estimates]
    df['n'] = [e.n for e in estimates]
    return df


def compare_frame(
    states: np.ndarray,
    modes: Sequence[int],
    p_check: Sequence[float],
    estimates: Sequence[MonteCarloEstimate],
    state_labels: Sequence[str] = (),
    mode_labels: Optional[Sequence[str]] = None,
    p_exact: Optional[Sequence[float]] = None,
    p_exact_interp: Optional[Sequence[float]] = None,
) -> pd.DataFrame:
    """
    Side-by-side checker bound, Monte Carlo estimate and exact table value.

    The `bound_ok` column is False where the estimate exceeds the checker's
    bound by more than SOUNDNESS_SIGMAS standard errors (plus PROB_ROUNDING).
    """
    df = mc_frame(states, modes, estimates, state_labels, mode_labels)
    df.insert(len(df.columns) - 3, 'p_check', np.asarray(p_check, dtype=np.float64))
    if p_exact is not None:
        df['p_exact'] = np.asarray(p_exact, dtype=np.float64)
    if p_exact_interp is not None:
        df['p_exact_interp'] = np.asarray(p_exact_interp, dtype=np.float64)
    df['bound_ok'] = df['p_check'] >= df['p_mc'] - SOUNDNESS_SIGMAS * df['stderr'] - PROB_ROUNDING
    violations = int((~df['bound_ok']).sum())
    if violations:
        logger.warning("%d of %d starts have estimates above the checker bound", violations, len(df))
    return df


def save_frame(df: pd.DataFrame, filepath: str) -> None:
    df.to_csv(filepath, index=False, float_format='%.17g')
    logger.info("Wrote %d rows to %s", len(df), filepath)


def read_frame(filepath: str) -> pd.DataFrame:
    return pd.read_csv(filepath)
