"""Reference points via the projected fixed-point form of a variational inequality.

``y*`` solves ``VI(Y, T)`` iff ``y* = Proj_Y(y* - theta T(y*))`` for any
``theta > 0``. For ``T`` strongly monotone with constant ``nu`` and
``L``-Lipschitz, ``theta = nu / (2 L^2)`` makes the map a contraction with
factor ``sqrt(1 - nu^2 / (4 L^2))``, so plain iteration converges.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .errors import ContractViolation
from .estimators import make_generator
from .games import GameDefinition
from .geometry import ProductSet

__all__ = [
    "VISolveResult",
    "fixed_point_residual",
    "solve_vi_fixed_point",
    "solve_ne",
    "solve_regularized_ne",
    "reference_gap_probe",
]


@dataclass
class VISolveResult:
    point: np.ndarray
    residual: float
    iterations: int
    converged: bool
    theta: float
    displacements: List[float] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {"point": self.point.tolist(), "residual": self.residual,
                "iterations": self.iterations, "converged": self.converged}


def fixed_point_residual(mapping: Callable, set_: ProductSet, theta: float, x) -> float:
    """``||Proj(x - theta T(x)) - x||``; zero exactly at VI solutions."""
    x = np.asarray(x, dtype=float)
    return float(np.linalg.norm(set_.project(x - theta * mapping(x)) - x))


def solve_vi_fixed_point(mapping: Callable, set_: ProductSet, lipschitz: float, nu: float,
                         tol: float = 1e-10, max_iter: int = 100_000, x0=None,
                         theta: Optional[float] = None) -> VISolveResult:
    """Iterate ``x <- Proj(x - theta T(x))`` from the set anchor.

    Stops when the displacement ``||x+ - x||`` is at most ``tol`` and returns
    the point ``x`` at which that displacement was measured, so the reported
    residual is exactly :func:`fixed_point_residual` of the returned point.
    Hitting ``max_iter`` gives ``converged=False`` rather than raising.
    """
    if not nu > 0:
        raise ContractViolation(f"nu > 0 required, got {nu}")
    if not lipschitz >= nu:
        raise ContractViolation(f"lipschitz constant must be >= nu, got L={lipschitz}, nu={nu}")
    if not tol > 0:
        raise ContractViolation(f"tol > 0 required, got {tol}")
    if theta is None:
        theta = nu / (2.0 * lipschitz ** 2)
    x = set_.anchor.copy() if x0 is None else set_.project(np.asarray(x0, dtype=float))
    history = []
    for it in range(max_iter):
        x_next = set_.project(x - theta * mapping(x))
        res = float(np.linalg.norm(x_next - x))
        history.append(res)
        if res <= tol:
            return VISolveResult(x, res, it, True, theta, history)
        x = x_next
    res = fixed_point_residual(mapping, set_, theta, x)
    return VISolveResult(x, res, max_iter, res <= tol, theta, history)


def solve_ne(game: GameDefinition, tol: float = 1e-10, max_iter: int = 100_000) -> VISolveResult:
    """Nash equilibrium as the solution of ``VI(A, M)``."""
    return solve_vi_fixed_point(game.pseudo_gradient, game.action_sets, game.lipschitz, game.nu,
                                tol=tol, max_iter=max_iter)


def _smoothed_mapping(game: GameDefinition, sigma: float, mc_samples: int, seed: int):
    # Common random numbers: the same draws at every x make the estimated
    # map deterministic, so fixed-point iteration on it is well defined.
    z = make_generator(seed, 2).standard_normal((mc_samples, game.joint_dim))

    def mapping(x):
        return game.pseudo_gradient(x + sigma * z).mean(axis=0)

    return mapping


def solve_regularized_ne(game: GameDefinition, rho: float, sigma: Optional[float] = None,
                         tol: float = 1e-10, mc_samples: int = 100_000, seed: int = 0,
                         exact_affine: bool = True, max_iter: int = 100_000) -> VISolveResult:
    """Solve the VI on ``A`` shrunk by ``rho``.

    ``sigma=None`` uses the exact pseudo-gradient. ``sigma > 0`` uses the
    Gaussian-smoothed pseudo-gradient, which equals ``M`` for affine games;
    otherwise (or with ``exact_affine=False``) it is a Monte Carlo average
    over ``mc_samples`` fixed draws.
    """
    if not 0 <= rho < 1:
        raise ContractViolation(f"0 <= rho < 1 required, got {rho}")
    mapping = game.pseudo_gradient
    if sigma is not None:
        if not sigma > 0:
            raise ContractViolation(f"sigma must be positive or None, got {sigma}")
        if not (game.is_affine and exact_affine):
            mapping = _smoothed_mapping(game, sigma, mc_samples, seed)
    return solve_vi_fixed_point(mapping, game.action_sets.shrink(rho), game.lipschitz, game.nu,
                                tol=tol, max_iter=max_iter)


def reference_gap_probe(game: GameDefinition, rho_list: Sequence[float], sigma_list: Sequence[Optional[float]],
                        tol: float = 1e-10, **solve_kwargs) -> List[dict]:
    """Distances between the equilibrium, smoothed equilibria and regularised ones.

    Rows of kind ``"smoothing"`` hold ``||mu*(sigma) - a*||`` (on the full
    set) and its ratio to ``sigma``; rows of kind ``"shrinkage"`` hold
    ``||y(rho, sigma) - mu*(sigma)||`` and ``||y(rho, sigma) - a*||`` with
    their ratios to ``rho``. A ``sigma`` of 0 or ``None`` means no smoothing.
    """
    if not len(rho_list) or not len(sigma_list):
        raise ContractViolation("rho_list and sigma_list must be non-empty")
    a_star = solve_ne(game, tol=tol).point
    rows = []
    for sigma in sigma_list:
        s = None if not sigma else float(sigma)
        mu_star = solve_regularized_ne(game, 0.0, s, tol=tol, **solve_kwargs).point
        gap = float(np.linalg.norm(mu_star - a_star))
        rows.append({"kind": "smoothing", "sigma": sigma or 0.0, "rho": 0.0, "distance": gap,
                     "ratio": gap / s if s else float("nan")})
        for rho in rho_list:
            y = solve_regularized_ne(game, float(rho), s, tol=tol, **solve_kwargs).point
            to_mu = float(np.linalg.norm(y - mu_star))
            to_ne = float(np.linalg.norm(y - a_star))
            rows.append({"kind": "shrinkage", "sigma": sigma or 0.0, "rho": float(rho), "distance": to_mu,
                         "distance_to_ne": to_ne,
                         "ratio": to_mu / rho if rho else float("nan"),
                         "ratio_to_ne": to_ne / rho if rho else float("nan")})
    return rows
