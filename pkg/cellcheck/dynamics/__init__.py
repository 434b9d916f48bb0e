"""
Stochastic transition models.
"""

from .base import (
    BOUNDARY_POLICIES,
    AffineOutcome,
    DynamicsModel,
    TransitionOutcome,
    interval_image,
)
from .continuum import ContinuumWorld, continuum_outcomes
from .vcas import ADVISORIES, VcasModel, vcas_outcomes, vcas_unsafe

MODELS = {
    'continuum': ContinuumWorld,
    'vcas': VcasModel,
}


def get_model(name: str, **kwargs) -> DynamicsModel:
    """
    Build a model by name.

    Args:
        name: 'continuum' or 'vcas'
        **kwargs: Model constructor arguments

    Raises:
        ValueError: If the model name is unknown
    """
    name = name.lower()
    if name not in MODELS:
        raise ValueError(f"Unknown model: {name}. Available: {list(MODELS.keys())}")
    return MODELS[name](**kwargs)


__all__ = [
    'ADVISORIES',
    'AffineOutcome',
    'BOUNDARY_POLICIES',
    'ContinuumWorld',
    'DynamicsModel',
    'MODELS',
    'TransitionOutcome',
    'VcasModel',
    'continuum_outcomes',
    'get_model',
    'interval_image',
    'vcas_outcomes',
    'vcas_unsafe',
]
