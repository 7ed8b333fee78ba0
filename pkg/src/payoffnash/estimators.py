"""Gaussian exploration and payoff-based gradient estimates.

Randomness is keyed, never stateful. Learner noise for iteration ``t`` of run
``r`` and player ``i`` comes from a Philox stream keyed by
``(seed, r, i, t // BLOCK_SIZE)``, read at row ``t % BLOCK_SIZE``; the draw is
therefore a pure function of ``(seed, r, t, i)`` and does not depend on how
runs are scheduled. Diagnostic probes take an explicit integer-tuple key.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Sequence, Tuple, Union

import numpy as np

from .errors import ContractViolation, NonFiniteError
from .games import GameDefinition
from .geometry import ProductSet

__all__ = [
    "BLOCK_SIZE",
    "ESTIMATOR_KINDS",
    "make_generator",
    "iteration_normals",
    "noise_block",
    "sample_state_perturbation",
    "one_point_estimate",
    "two_point_estimate",
    "smoothed_pseudo_gradient_mc",
    "sampled_estimate_moments",
    "variance_probe",
    "projection_bias_probe",
    "escape_probability_probe",
]

BLOCK_SIZE = 1024
ESTIMATOR_KINDS = ("one_point", "two_point")

# Domain tags keep learner streams and probe streams disjoint.
_LEARNER_TAG = 0
_PROBE_TAG = 1

Key = Union[int, Sequence[int]]


def _key_tuple(key: Key) -> Tuple[int, ...]:
    key = (key,) if np.isscalar(key) else tuple(key)
    if not key or any(int(k) != k or k < 0 for k in key):
        raise ContractViolation(f"rng key must be non-negative integers, got {key!r}")
    return tuple(int(k) for k in key)


def make_generator(seed: int, *spawn_key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in spawn_key))
    return np.random.Generator(np.random.Philox(ss))


def _probe_generator(key: Key) -> np.random.Generator:
    seed, *rest = _key_tuple(key)
    return make_generator(seed, _PROBE_TAG, *rest)


@lru_cache(maxsize=512)
def _player_block(seed: int, run_index: int, player: int, block: int, dim: int) -> np.ndarray:
    z = make_generator(seed, _LEARNER_TAG, run_index, player, block).standard_normal((BLOCK_SIZE, dim))
    z.flags.writeable = False
    return z


def noise_block(seed: int, run_indices: Sequence[int], block: int, n_players: int, dim: int) -> np.ndarray:
    """Standard normals for ``BLOCK_SIZE`` iterations, shape ``(R, BLOCK_SIZE, N*d)``."""
    out = np.empty((len(run_indices), BLOCK_SIZE, n_players * dim))
    for r, run in enumerate(run_indices):
        for i in range(n_players):
            out[r, :, i * dim:(i + 1) * dim] = make_generator(
                seed, _LEARNER_TAG, run, i, block).standard_normal((BLOCK_SIZE, dim))
    return out


def iteration_normals(seed: int, run_index: int, t: int, n_players: int, dim: int) -> np.ndarray:
    """The joint standard-normal draw used at iteration ``t`` (``t >= 1``)."""
    block, row = divmod(int(t), BLOCK_SIZE)
    return np.concatenate([_player_block(int(seed), int(run_index), i, block, dim)[row]
                           for i in range(n_players)])


def _check_sigma(sigma: float) -> float:
    sigma = float(sigma)
    if not (np.isfinite(sigma) and sigma > 0):
        raise ContractViolation(f"sigma must be positive and finite, got {sigma!r}")
    return sigma


def sample_state_perturbation(mu, sigma: float, key: Key, n_samples: int = None) -> np.ndarray:
    """Draw ``xi ~ N(mu, sigma^2 I)``; ``n_samples`` adds a leading sample axis."""
    sigma = _check_sigma(sigma)
    mu = np.asarray(mu, dtype=float)
    shape = mu.shape if n_samples is None else (int(n_samples),) + mu.shape
    return mu + sigma * _probe_generator(key).standard_normal(shape)


def _direction(xi, mu, sigma):
    return (np.asarray(xi, dtype=float) - np.asarray(mu, dtype=float)) / (sigma * sigma)


def _finite_payoff(value, name):
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        bad = arr[~np.isfinite(arr)].ravel()[0] if arr.ndim else float(arr)
        raise NonFiniteError(f"{name} is not finite: {bad!r}", value=bad)
    return arr


def one_point_estimate(payoff, xi_i, mu_i, sigma: float) -> np.ndarray:
    """``payoff * (xi_i - mu_i) / sigma^2``."""
    sigma = _check_sigma(sigma)
    payoff = _finite_payoff(payoff, "payoff")
    return payoff[..., None] * _direction(xi_i, mu_i, sigma)


def two_point_estimate(payoff_at_action, payoff_at_state, xi_i, mu_i, sigma: float) -> np.ndarray:
    """``(payoff_at_action - payoff_at_state) * (xi_i - mu_i) / sigma^2``."""
    sigma = _check_sigma(sigma)
    hi = _finite_payoff(payoff_at_action, "payoff_at_action")
    lo = _finite_payoff(payoff_at_state, "payoff_at_state")
    xi_i, mu_i = np.asarray(xi_i, dtype=float), np.asarray(mu_i, dtype=float)
    if not (np.all(np.isfinite(xi_i)) and np.all(np.isfinite(mu_i))):
        raise NonFiniteError("sample or state is not finite")
    return (hi - lo)[..., None] * _direction(xi_i, mu_i, sigma)


def _joint_estimates(game: GameDefinition, kind: str, xi, mu, payoff_point, sigma):
    """Stacked estimates for all players given samples ``xi`` (..., N*d).

    ``payoff_point`` is where the payoff is observed: the sample itself for
    the smoothed-gradient identity, or the projected action in the learner.
    """
    payoff = game.costs(payoff_point)
    if kind == "two_point":
        payoff = payoff - game.costs(mu)
    elif kind != "one_point":
        raise ContractViolation(f"unknown estimator kind {kind!r}; expected one of {ESTIMATOR_KINDS}")
    weights = np.repeat(payoff, game.dim, axis=-1)
    return weights * _direction(xi, mu, sigma)


def _mean_and_stderr(samples: np.ndarray):
    n = samples.shape[0]
    mean = samples.mean(axis=0)
    if n < 2:
        return mean, np.full_like(mean, np.nan)
    return mean, samples.std(axis=0, ddof=1) / np.sqrt(n)


def smoothed_pseudo_gradient_mc(game: GameDefinition, mu, sigma: float, n_samples: int, key: Key):
    """Monte Carlo average of ``M(xi)``, ``xi ~ N(mu, sigma^2 I)``.

    Returns ``(estimate, stderr)``, both of length ``N*d``. With one sample
    the standard error is undefined and reported as NaN.
    """
    if n_samples < 1:
        raise ContractViolation(f"n_samples must be at least 1, got {n_samples}")
    xi = sample_state_perturbation(mu, sigma, key, n_samples)
    return _mean_and_stderr(game.pseudo_gradient(xi))


def sampled_estimate_moments(game: GameDefinition, mu, sigma: float, kind: str, n_samples: int,
                             key: Key, observe_at: str = "sample"):
    """Mean and standard error of the joint estimate over ``n_samples`` draws.

    ``observe_at="sample"`` evaluates payoffs at ``xi`` (the smoothed-gradient
    identity); ``"action"`` evaluates them at ``Proj_A(xi)`` as the learner does.
    """
    sigma = _check_sigma(sigma)
    mu = np.asarray(mu, dtype=float)
    xi = sample_state_perturbation(mu, sigma, key, n_samples)
    point = xi if observe_at == "sample" else game.action_sets.project(xi)
    return _mean_and_stderr(_joint_estimates(game, kind, xi, mu, point, sigma))


def variance_probe(game: GameDefinition, mu, sigma: float, kind: str, n_samples: int, key: Key,
                   reference_samples: int = 10 ** 6) -> np.ndarray:
    """Per-player empirical ``E||m_i - Mtilde_i||^2`` with payoffs taken at ``xi``.

    ``Mtilde`` comes from :func:`smoothed_pseudo_gradient_mc` on an independent
    stream with ``reference_samples`` draws.
    """
    sigma = _check_sigma(sigma)
    mu = np.asarray(mu, dtype=float)
    key = _key_tuple(key)
    reference, _ = smoothed_pseudo_gradient_mc(game, mu, sigma, reference_samples, key + (1,))
    xi = sample_state_perturbation(mu, sigma, key + (0,), n_samples)
    est = _joint_estimates(game, kind, xi, mu, xi, sigma)
    sq = (est - reference) ** 2
    per_player = sq.reshape(n_samples, game.n_players, game.dim).sum(axis=-1)
    return per_player.mean(axis=0)


def projection_bias_probe(game: GameDefinition, mu, sigma: float, n_samples: int, key: Key) -> np.ndarray:
    """Per-player mean of ``|J_i(a) - J_i(xi)| ||xi^i - mu^i|| / sigma^2`` with
    ``a = Proj_A(xi)``: the bias from observing payoffs at the played action."""
    sigma = _check_sigma(sigma)
    mu = np.asarray(mu, dtype=float)
    xi = sample_state_perturbation(mu, sigma, key, n_samples)
    action = game.action_sets.project(xi)
    gap = np.abs(game.costs(action) - game.costs(xi))
    step = np.linalg.norm(_direction(xi, mu, sigma).reshape(n_samples, game.n_players, game.dim), axis=-1)
    return (gap * step).mean(axis=0)


def escape_probability_probe(set_: ProductSet, mu, sigma: float, rho: float, n_samples: int, key: Key) -> float:
    """Fraction of draws ``xi ~ N(mu, sigma^2 I)`` that land outside ``set_``.

    ``mu`` must lie in ``set_.shrink(rho)``.
    """
    sigma = _check_sigma(sigma)
    mu = np.asarray(mu, dtype=float)
    if not bool(set_.shrink(rho).contains(mu)):
        raise ContractViolation(f"mu={mu.tolist()} is not inside the set shrunk by rho={rho}")
    xi = sample_state_perturbation(mu, sigma, key, n_samples)
    return float(np.mean(~set_.contains(xi)))
