"""Approximate mirror policy optimization with omega-potential mirror maps."""

from .engine import AmpoConfig, Constant, Geometric, Sequence, parse_schedule, run
from .exceptions import (
    AmpoError,
    ConfigError,
    DomainError,
    NumericalError,
    ProjectionInfeasibleError,
    SimplexError,
    SupportError,
)
from .mdp import TabularMdp, random_mdp
from .mirror_maps import OmegaPotential, parse_mirror_map
from .projection import project

__version__ = "0.1.0"
