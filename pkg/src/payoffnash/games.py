"""Convex games with strongly monotone pseudo-gradients.

A game carries its per-player costs ``J_i``, the stacked own-action gradient
``M(a) = (grad_{a^i} J_i(a))_i`` and a monotonicity constant ``nu`` that is
computed, never taken on trust. Costs are defined on all of ``R^{N d}``,
since Gaussian exploration samples points outside the action sets.

Every evaluation broadcasts over leading axes: ``costs`` maps ``(..., N*d)``
to ``(..., N)`` and ``pseudo_gradient`` maps ``(..., N*d)`` to ``(..., N*d)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ContractViolation, GameConstructionError
from .geometry import Box, ProductSet, product_from_config, set_from_config

__all__ = [
    "GameDefinition",
    "AffineGameSpec",
    "AffineGame",
    "GradientCheckReport",
    "MonotonicityReport",
    "make_canonical_quadratic",
    "make_affine_game",
    "make_cournot",
    "make_zero_game",
    "check_gradient_consistency",
    "check_strong_monotonicity",
    "game_from_config",
]


def _matvec(B: np.ndarray, x: np.ndarray) -> np.ndarray:
    # Broadcast-and-sum instead of BLAS: each row's result then depends only on
    # that row, so batched and single-run evaluations agree bit for bit.
    return (x[..., None, :] * B).sum(axis=-1)


@dataclass(frozen=True, eq=False)
class GameDefinition:
    """Base class for an ``N``-player game with ``d``-dimensional actions."""

    n_players: int
    dim: int
    action_sets: ProductSet
    nu: float
    lipschitz: float
    name: str = "game"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n_players < 1 or self.dim < 1:
            raise GameConstructionError("n_players and dim must be positive")
        if self.action_sets.n_players != self.n_players or self.action_sets.player_dim != self.dim:
            raise GameConstructionError(
                f"action sets are {self.action_sets.n_players}x{self.action_sets.player_dim}, "
                f"game is {self.n_players}x{self.dim}"
            )

    @property
    def joint_dim(self) -> int:
        return self.n_players * self.dim

    def costs(self, x) -> np.ndarray:
        raise NotImplementedError

    def pseudo_gradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def cost(self, i: int, x) -> np.ndarray:
        """Cost of player ``i`` at joint action ``x``."""
        return self.costs(x)[..., i]

    def player_slice(self, i: int) -> slice:
        return slice(i * self.dim, (i + 1) * self.dim)

    @property
    def is_affine(self) -> bool:
        return False

    def closed_form_equilibrium(self) -> Optional[np.ndarray]:
        """Unconstrained root of ``M`` if it is feasible, else ``None``."""
        return None

    def describe(self) -> dict:
        return {"name": self.name, "n_players": self.n_players, "dim": self.dim,
                "nu": self.nu, "lipschitz": self.lipschitz, **self.params}


@dataclass(frozen=True, eq=False)
class AffineGameSpec:
    """Pseudo-gradient ``M(a) = B a + b`` with symmetric diagonal blocks.

    Player ``i``'s cost is the quadratic
    ``J_i(a) = 1/2 a^i' B_ii a^i + sum_{j != i} a^i' B_ij a^j + b_i' a^i``,
    whose own-action gradient is row block ``i`` of ``B a + b``.
    """

    B: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        B = np.array(self.B, dtype=float)
        b = np.array(self.b, dtype=float)
        if B.ndim != 2 or B.shape[0] != B.shape[1]:
            raise GameConstructionError(f"B must be square, got shape {B.shape}")
        if b.shape != (B.shape[0],):
            raise GameConstructionError(f"b must have length {B.shape[0]}, got shape {b.shape}")
        if not (np.all(np.isfinite(B)) and np.all(np.isfinite(b))):
            raise GameConstructionError("B and b must be finite")
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "b", b)

    @property
    def monotonicity(self) -> float:
        """Smallest eigenvalue of the symmetric part of ``B``."""
        return float(np.linalg.eigvalsh(0.5 * (self.B + self.B.T)).min())

    @property
    def lipschitz(self) -> float:
        return float(np.linalg.norm(self.B, 2))


@dataclass(frozen=True, eq=False)
class AffineGame(GameDefinition):
    """Game whose pseudo-gradient is affine; costs are the quadratics built from ``B`` and ``b``."""

    spec: AffineGameSpec = None

    def __post_init__(self):
        super().__post_init__()
        n, d = self.joint_dim, self.dim
        if self.spec.B.shape != (n, n):
            raise GameConstructionError(f"B must be {n}x{n} for this game, got {self.spec.B.shape}")
        own = np.zeros_like(self.spec.B)
        for i in range(self.n_players):
            s = self.player_slice(i)
            block = self.spec.B[s, s]
            if not np.array_equal(block, block.T):
                raise GameConstructionError(
                    f"diagonal block of player {i} is not symmetric; no cost has this gradient"
                )
            own[s, s] = block
        object.__setattr__(self, "_own", own)

    @property
    def is_affine(self) -> bool:
        return True

    def pseudo_gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return _matvec(self.spec.B, x) + self.spec.b

    def costs(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        inner = _matvec(self.spec.B, x) - 0.5 * _matvec(self._own, x) + self.spec.b
        per_coord = x * inner
        return per_coord.reshape(*x.shape[:-1], self.n_players, self.dim).sum(axis=-1)

    def closed_form_equilibrium(self) -> Optional[np.ndarray]:
        root = np.linalg.solve(self.spec.B, -self.spec.b)
        if bool(self.action_sets.contains(root)):
            return root
        return None


def make_affine_game(spec: AffineGameSpec, sets: ProductSet, name: str = "affine",
                     params: Optional[dict] = None) -> AffineGame:
    """Game with ``M(a) = B a + b``; ``nu`` is the eigmin of ``(B + B')/2``."""
    nu = spec.monotonicity
    if not nu > 0:
        raise GameConstructionError(
            f"pseudo-gradient is not strongly monotone: smallest eigenvalue of the "
            f"symmetric part of B is {nu:.6g}"
        )
    if spec.B.shape[0] % sets.n_players:
        raise GameConstructionError("B size is not a multiple of the number of players")
    return AffineGame(
        n_players=sets.n_players,
        dim=sets.player_dim,
        action_sets=sets,
        nu=nu,
        lipschitz=spec.lipschitz,
        name=name,
        params=dict(params or {}),
        spec=spec,
    )


def make_canonical_quadratic() -> AffineGame:
    """Two players on ``[0, 1]``, ``J_1 = a1^2 + a1 a2 - a1`` and symmetrically
    for player 2. Equilibrium ``(1/3, 1/3)``, ``nu = 1``."""
    spec = AffineGameSpec([[2.0, 1.0], [1.0, 2.0]], [-1.0, -1.0])
    sets = ProductSet.repeat(Box([0.0], [1.0], [0.5]), 2)
    return make_affine_game(spec, sets, name="canonical_quadratic")


def make_cournot(n_players: int, price_intercept: float, price_slope: float,
                 unit_costs, capacity: float) -> AffineGame:
    """Cournot oligopoly with linear inverse demand ``P - S * sum(a)``.

    Firm ``i`` minimises ``a_i (c_i - P + S sum_j a_j)`` over ``[0, capacity]``.
    """
    P, S = float(price_intercept), float(price_slope)
    c = np.asarray(unit_costs, dtype=float)
    if n_players < 1:
        raise GameConstructionError(f"need at least one firm, got {n_players}")
    if c.shape != (n_players,):
        raise GameConstructionError(f"unit_costs must have {n_players} entries, got {c.shape}")
    if not S > 0:
        raise GameConstructionError(f"price_slope must be positive, got {S}")
    if not np.all(c < P):
        raise GameConstructionError("every unit cost must be below the price intercept")
    if not capacity > 0:
        raise GameConstructionError(f"capacity must be positive, got {capacity}")
    B = S * (np.ones((n_players, n_players)) + np.eye(n_players))
    spec = AffineGameSpec(B, c - P)
    sets = ProductSet.repeat(Box([0.0], [float(capacity)]), n_players)
    # Eigenvalues of S (11' + I): S (N + 1) once, S with multiplicity N - 1.
    nu = 2.0 * S if n_players == 1 else S
    params = {"price_intercept": P, "price_slope": S, "unit_costs": c.tolist(), "capacity": float(capacity)}
    return AffineGame(
        n_players=n_players, dim=1, action_sets=sets, nu=nu, lipschitz=S * (n_players + 1),
        name="cournot", params=params, spec=spec,
    )


def make_zero_game(sets: ProductSet) -> AffineGame:
    """All costs identically zero. Not strongly monotone (``nu = 0``); used to
    check that estimators and updates vanish."""
    n = sets.dim
    spec = AffineGameSpec(np.zeros((n, n)), np.zeros(n))
    return AffineGame(n_players=sets.n_players, dim=sets.player_dim, action_sets=sets,
                      nu=0.0, lipschitz=0.0, name="zero", spec=spec)


@dataclass
class GradientCheckReport:
    max_deviation: float
    threshold: float
    n_points: int

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.threshold


def check_gradient_consistency(game: GameDefinition, points, h: float = 1e-4) -> GradientCheckReport:
    """Compare ``pseudo_gradient`` with central differences of each player's
    own cost. Passes iff the worst deviation is at most ``10 h^2``."""
    if not h > 0:
        raise ContractViolation(f"step h must be positive, got {h}")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    grad = game.pseudo_gradient(pts)
    fd = np.empty_like(grad)
    for i in range(game.n_players):
        for k in range(game.dim):
            col = i * game.dim + k
            e = np.zeros(game.joint_dim)
            e[col] = h
            fd[:, col] = (game.cost(i, pts + e) - game.cost(i, pts - e)) / (2 * h)
    dev = float(np.max(np.abs(fd - grad))) if pts.size else 0.0
    return GradientCheckReport(dev, 10 * h * h, len(pts))


@dataclass
class MonotonicityReport:
    min_ratio: float
    nu: float
    n_pairs: int

    @property
    def passed(self) -> bool:
        return self.min_ratio >= self.nu - 1e-9


def check_strong_monotonicity(game: GameDefinition, n_pairs: int = 1000, rng_seed: int = 0) -> MonotonicityReport:
    """Smallest ``(M(x) - M(y), x - y) / ||x - y||^2`` over uniform pairs in ``A``."""
    if n_pairs < 1:
        raise ContractViolation(f"n_pairs must be at least 1, got {n_pairs}")
    rng = np.random.default_rng(rng_seed)
    x = game.action_sets.sample_uniform(rng, n_pairs)
    y = game.action_sets.sample_uniform(rng, n_pairs)
    diff = x - y
    num = np.sum((game.pseudo_gradient(x) - game.pseudo_gradient(y)) * diff, axis=1)
    den = np.sum(diff * diff, axis=1)
    keep = den > 0
    ratio = float(np.min(num[keep] / den[keep])) if np.any(keep) else float("nan")
    return MonotonicityReport(ratio, game.nu, n_pairs)


def game_from_config(spec: dict) -> GameDefinition:
    """Build a game from its configuration mapping.

    Recognised forms::

        {"game": "canonical_quadratic"}
        {"game": "affine", "B": [[...]], "b": [...], "sets": {...} | [{...}, ...],
         "n_players": N}
        {"game": "cournot", "n": N, "price_intercept": P, "price_slope": S,
         "unit_costs": [...], "capacity": C}
    """
    if not isinstance(spec, dict) or "game" not in spec:
        raise ContractViolation(f"game specification must be a mapping with a 'game' key, got {spec!r}")
    kind = spec["game"]
    try:
        if kind == "canonical_quadratic":
            return make_canonical_quadratic()
        if kind == "affine":
            aff = AffineGameSpec(spec["B"], spec["b"])
            sets_spec = spec["sets"]
            if isinstance(sets_spec, dict):
                player_dim = set_from_config(sets_spec).dim
                if aff.b.shape[0] % player_dim:
                    raise GameConstructionError("B size is not a multiple of the set dimension")
                n_players = aff.b.shape[0] // player_dim
            else:
                n_players = len(sets_spec)
            return make_affine_game(aff, product_from_config(sets_spec, n_players))
        if kind == "cournot":
            return make_cournot(int(spec["n"]), spec["price_intercept"], spec["price_slope"],
                                spec["unit_costs"], spec["capacity"])
    except KeyError as exc:
        raise ContractViolation(f"{kind} game specification is missing key {exc}") from None
    raise ContractViolation(f"unknown game {kind!r}; expected canonical_quadratic, affine or cournot")
