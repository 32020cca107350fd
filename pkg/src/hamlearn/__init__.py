"""Parallel Hamiltonian learning of X-driven ZZ models by quantum signal processing."""

from .errors import *  # noqa: F401,F403
from .learner import (
    LearnReport,
    learn_all_analog,
    learn_all_hybrid,
    learn_pair,
    learn_targeted,
    resource_accounting,
)
from .model import HamiltonianSpec, SubspacePair, coefficient_matrix, enumerate_subspaces, select_subspaces
from .noise import NoiseConfig
from .sim import ExperimentConfig

__version__ = "0.1.0"
