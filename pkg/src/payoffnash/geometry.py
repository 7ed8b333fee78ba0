"""Compact convex action sets with closed-form Euclidean projections.

Only boxes and Euclidean balls are supported. Both shrink toward an interior
anchor point: ``shrink(S, rho) = {anchor + (1 - rho) (x - anchor) : x in S}``.
All projection routines broadcast over leading axes, so a batch of points of
shape ``(..., dim)`` is projected row by row.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence, Union

import numpy as np

from .errors import ContractViolation

__all__ = [
    "Box",
    "Ball",
    "ConvexSet",
    "ProductSet",
    "project",
    "shrink",
    "contains",
    "set_from_config",
]


def _as_vector(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ContractViolation(f"{name} must be a 1-D vector, got shape {arr.shape}")
    return arr


def _check_rho(rho: float) -> float:
    rho = float(rho)
    if not (0.0 <= rho < 1.0):
        raise ContractViolation(f"shrink factor rho must lie in [0, 1), got {rho!r}")
    return rho


def _check_point(x, dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (dim,):
        raise ContractViolation(
            f"dimension mismatch: set has dim {dim}, point has shape {x.shape}"
        )
    return x


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-aligned box ``lower <= x <= upper``."""

    lower: np.ndarray
    upper: np.ndarray
    anchor: np.ndarray = None

    kind = "box"

    def __post_init__(self):
        lower = _as_vector(self.lower, "lower")
        upper = _as_vector(self.upper, "upper")
        if lower.shape != upper.shape:
            raise ContractViolation("lower and upper bounds must have equal length")
        if not np.all(np.isfinite(lower)) or not np.all(np.isfinite(upper)):
            raise ContractViolation("box bounds must be finite (the set is compact)")
        if not np.all(lower < upper):
            raise ContractViolation("box requires lower < upper componentwise")
        anchor = 0.5 * (lower + upper) if self.anchor is None else _as_vector(self.anchor, "anchor")
        if anchor.shape != lower.shape:
            raise ContractViolation("anchor dimension does not match the box")
        if not np.all((lower < anchor) & (anchor < upper)):
            raise ContractViolation("anchor must lie strictly inside the box")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "anchor", anchor)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))

    def project(self, x) -> np.ndarray:
        x = _check_point(x, self.dim)
        return np.clip(x, self.lower, self.upper)

    def shrink(self, rho: float) -> "Box":
        rho = _check_rho(rho)
        if rho == 0.0:
            return self
        scale = 1.0 - rho
        return Box(
            self.anchor + scale * (self.lower - self.anchor),
            self.anchor + scale * (self.upper - self.anchor),
            self.anchor,
        )

    def contains(self, x, tol: float = 0.0) -> np.ndarray:
        x = _check_point(x, self.dim)
        ok = (x >= self.lower - tol) & (x <= self.upper + tol)
        return np.all(ok, axis=-1)

    def distance(self, x) -> np.ndarray:
        x = _check_point(x, self.dim)
        return np.linalg.norm(x - self.project(x), axis=-1)

    def sample_uniform(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.lower, self.upper, size=(n, self.dim))

    def to_config(self) -> dict:
        return {
            "kind": "box",
            "lower": self.lower.tolist(),
            "upper": self.upper.tolist(),
            "anchor": self.anchor.tolist(),
        }


@dataclass(frozen=True, eq=False)
class Ball:
    """Closed Euclidean ball ``||x - center|| <= radius``."""

    center: np.ndarray
    radius: float
    anchor: np.ndarray = None

    kind = "ball"

    def __post_init__(self):
        center = _as_vector(self.center, "center")
        radius = float(self.radius)
        if not (np.isfinite(radius) and radius > 0):
            raise ContractViolation(f"ball radius must be positive and finite, got {radius!r}")
        anchor = center.copy() if self.anchor is None else _as_vector(self.anchor, "anchor")
        if anchor.shape != center.shape:
            raise ContractViolation("anchor dimension does not match the ball")
        if not np.linalg.norm(anchor - center) < radius:
            raise ContractViolation("anchor must lie strictly inside the ball")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "radius", radius)
        object.__setattr__(self, "anchor", anchor)

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    def _norm(self, x: np.ndarray) -> np.ndarray:
        return np.linalg.norm(x - self.center, axis=-1)

    def project(self, x) -> np.ndarray:
        x = _check_point(x, self.dim)
        offset = x - self.center
        norm = np.linalg.norm(offset, axis=-1, keepdims=True)
        outside = norm > self.radius
        scale = np.where(outside, self.radius / np.where(outside, norm, 1.0), 1.0)
        y = np.where(outside, self.center + offset * scale, x)
        # Rounding can leave the rescaled point an ulp outside; pull it in.
        for _ in range(8):
            bad = (self._norm(y) > self.radius)[..., None]
            if not np.any(bad):
                break
            y = np.where(bad, self.center + (y - self.center) * (1.0 - 4 * np.finfo(float).eps), y)
        return y

    def shrink(self, rho: float) -> "Ball":
        rho = _check_rho(rho)
        if rho == 0.0:
            return self
        scale = 1.0 - rho
        return Ball(self.anchor + scale * (self.center - self.anchor), scale * self.radius, self.anchor)

    def contains(self, x, tol: float = 0.0) -> np.ndarray:
        x = _check_point(x, self.dim)
        return self._norm(x) <= self.radius + tol

    def distance(self, x) -> np.ndarray:
        x = _check_point(x, self.dim)
        return np.maximum(self._norm(x) - self.radius, 0.0)

    def sample_uniform(self, rng: np.random.Generator, n: int) -> np.ndarray:
        direction = rng.standard_normal((n, self.dim))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        r = self.radius * rng.uniform(size=(n, 1)) ** (1.0 / self.dim)
        return self.center + r * direction

    def to_config(self) -> dict:
        return {
            "kind": "ball",
            "center": self.center.tolist(),
            "radius": self.radius,
            "anchor": self.anchor.tolist(),
        }


ConvexSet = Union[Box, Ball]


def project(set_: ConvexSet, x) -> np.ndarray:
    """Euclidean projection of ``x`` onto ``set_``."""
    return set_.project(x)


def shrink(set_: ConvexSet, rho: float) -> ConvexSet:
    """Scale ``set_`` by ``1 - rho`` about its anchor."""
    return set_.shrink(rho)


def contains(set_: ConvexSet, x, tol: float = 0.0):
    """Membership test with slack ``tol`` on every defining inequality."""
    if tol < 0:
        raise ContractViolation(f"tol must be non-negative, got {tol!r}")
    return set_.contains(x, tol)


@dataclass(frozen=True, eq=False)
class ProductSet:
    """Joint action set ``A_1 x ... x A_N``; all factors share dimension ``d``.

    Joint vectors are flat, of length ``N * d``, with player ``i`` occupying
    the slice ``[i*d, (i+1)*d)``.
    """

    factors: tuple = field(default_factory=tuple)

    def __post_init__(self):
        factors = tuple(self.factors)
        if not factors:
            raise ContractViolation("a product set needs at least one factor")
        dims = {f.dim for f in factors}
        if len(dims) != 1:
            raise ContractViolation(f"all factors must share one dimension, got {sorted(dims)}")
        object.__setattr__(self, "factors", factors)

    @classmethod
    def repeat(cls, factor: ConvexSet, n_players: int) -> "ProductSet":
        return cls(tuple([factor] * n_players))

    @property
    def n_players(self) -> int:
        return len(self.factors)

    @property
    def player_dim(self) -> int:
        return self.factors[0].dim

    @property
    def dim(self) -> int:
        return self.n_players * self.player_dim

    @cached_property
    def anchor(self) -> np.ndarray:
        return np.concatenate([f.anchor for f in self.factors])

    @cached_property
    def _bounds(self):
        if all(isinstance(f, Box) for f in self.factors):
            return (
                np.concatenate([f.lower for f in self.factors]),
                np.concatenate([f.upper for f in self.factors]),
            )
        return None

    @property
    def diameter(self) -> float:
        return float(np.sqrt(sum(f.diameter ** 2 for f in self.factors)))

    def _split(self, x):
        d = self.player_dim
        return [x[..., i * d:(i + 1) * d] for i in range(self.n_players)]

    def project(self, x) -> np.ndarray:
        x = _check_point(x, self.dim)
        if self._bounds is not None:
            return np.clip(x, *self._bounds)
        return np.concatenate([f.project(xi) for f, xi in zip(self.factors, self._split(x))], axis=-1)

    def shrink(self, rho: float) -> "ProductSet":
        rho = _check_rho(rho)
        if rho == 0.0:
            return self
        return ProductSet(tuple(f.shrink(rho) for f in self.factors))

    def project_shrunk(self, x, rho: float) -> np.ndarray:
        """Same result as ``self.shrink(rho).project(x)`` without building the set."""
        rho = _check_rho(rho)
        if self._bounds is None or rho == 0.0:
            return self.shrink(rho).project(x)
        x = _check_point(x, self.dim)
        lower, upper = self._bounds
        scale = 1.0 - rho
        anchor = self.anchor
        return np.clip(x, anchor + scale * (lower - anchor), anchor + scale * (upper - anchor))

    def contains(self, x, tol: float = 0.0):
        if tol < 0:
            raise ContractViolation(f"tol must be non-negative, got {tol!r}")
        x = _check_point(x, self.dim)
        parts = [f.contains(xi, tol) for f, xi in zip(self.factors, self._split(x))]
        return np.logical_and.reduce(parts)

    def distance(self, x) -> np.ndarray:
        x = _check_point(x, self.dim)
        return np.linalg.norm(x - self.project(x), axis=-1)

    def sample_uniform(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.concatenate([f.sample_uniform(rng, n) for f in self.factors], axis=1)

    def to_config(self) -> list:
        return [f.to_config() for f in self.factors]


def set_from_config(spec: dict) -> ConvexSet:
    """Build a box or ball from ``{"kind": "box", "lower": .., "upper": ..}``
    or ``{"kind": "ball", "center": .., "radius": ..}``; ``anchor`` optional."""
    if not isinstance(spec, dict):
        raise ContractViolation(f"set specification must be a mapping, got {spec!r}")
    kind = spec.get("kind")
    try:
        if kind == "box":
            return Box(spec["lower"], spec["upper"], spec.get("anchor"))
        if kind == "ball":
            return Ball(spec["center"], spec["radius"], spec.get("anchor"))
    except KeyError as exc:
        raise ContractViolation(f"{kind} specification is missing key {exc}") from None
    raise ContractViolation(f"unknown set kind {kind!r}; expected 'box' or 'ball'")


def product_from_config(spec: Union[dict, Sequence[dict]], n_players: int) -> ProductSet:
    """A single set spec is repeated for every player; a list gives one per player."""
    if isinstance(spec, dict):
        return ProductSet.repeat(set_from_config(spec), n_players)
    factors = [set_from_config(s) for s in spec]
    if len(factors) != n_players:
        raise ContractViolation(f"expected {n_players} player sets, got {len(factors)}")
    return ProductSet(tuple(factors))
