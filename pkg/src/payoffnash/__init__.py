"""Payoff-based learning of Nash equilibria in strongly monotone games."""

from .errors import ContractViolation, GameConstructionError, NonFiniteError
from .games import (
    AffineGameSpec,
    GameDefinition,
    make_affine_game,
    make_canonical_quadratic,
    make_cournot,
    make_zero_game,
)
from .geometry import Ball, Box, ProductSet
from .learner import Schedule, make_schedule, run, run_batch, step
from .solvers import solve_ne, solve_regularized_ne, solve_vi_fixed_point

__version__ = "0.1.0"
