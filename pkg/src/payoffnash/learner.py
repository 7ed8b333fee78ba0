"""Payoff-based Nash equilibrium learning.

Each iteration every player, simultaneously:

1. samples ``xi^i ~ N(mu^i, sigma_t^2 I)``,
2. plays ``a^i = Proj_{A_i}(xi^i)`` and observes ``J_i(a)``,
3. forms ``m^i = J_i(a) (xi^i - mu^i) / sigma_t^2`` (one-point) or
   ``(J_i(a) - J_i(mu)) (xi^i - mu^i) / sigma_t^2`` (two-point),
4. updates ``mu^i <- Proj_{(1 - rho_t) A_i}(mu^i - gamma_t m^i)``.

Many independent runs are advanced together as rows of one array; every
operation is row-wise, so a run's trajectory does not depend on which other
runs share its batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import ContractViolation, NonFiniteError
from .estimators import BLOCK_SIZE, ESTIMATOR_KINDS, iteration_normals, noise_block
from .games import GameDefinition

__all__ = [
    "Schedule",
    "make_schedule",
    "LearnerState",
    "Trajectory",
    "BatchTrajectory",
    "checkpoint_times",
    "initial_state",
    "step",
    "run",
    "run_batch",
]

SCHEDULE_MODES = ("theorem1", "theorem2")


@dataclass(frozen=True)
class Schedule:
    """Step size, exploration scale and shrinkage as functions of ``t >= 1``.

    ``theorem1``: ``gamma = 4/(nu t)``, ``sigma = a t^(-1/4)``,
    ``rho = min(rho_max, t^-(1/4 - epsilon))``.
    ``theorem2``: ``gamma = 4/(nu t)``, ``sigma = b t^-s``,
    ``rho = min(rho_max, c t^-r)`` with ``1 <= r < s``.
    """

    mode: str
    nu: float
    a: float = 1.0
    epsilon: float = 0.05
    b: float = 1.0
    c: float = 0.5
    r: float = 1.0
    s: float = 2.0
    rho_max: float = 0.5
    t0: int = 1

    def gamma(self, t):
        return 4.0 / (self.nu * np.asarray(t, dtype=float))

    def sigma(self, t):
        t = np.asarray(t, dtype=float)
        if self.mode == "theorem1":
            return self.a * t ** -0.25
        return self.b * t ** -self.s

    def rho(self, t):
        t = np.asarray(t, dtype=float)
        if self.mode == "theorem1":
            raw = t ** -(0.25 - self.epsilon)
        else:
            raw = self.c * t ** -self.r
        return np.minimum(self.rho_max, raw)

    def at(self, t: int):
        """``(gamma, sigma, rho)`` at iteration ``t`` as Python floats."""
        return float(self.gamma(t)), float(self.sigma(t)), float(self.rho(t))

    def to_dict(self) -> dict:
        keys = ("a", "epsilon") if self.mode == "theorem1" else ("b", "c", "r", "s")
        return {"mode": self.mode, "nu": self.nu, "rho_max": self.rho_max, "t0": self.t0,
                **{k: getattr(self, k) for k in keys}}


def make_schedule(mode: str, nu: float, **params) -> Schedule:
    """Validated :class:`Schedule`. Unknown parameter names are rejected."""
    if mode not in SCHEDULE_MODES:
        raise ContractViolation(f"schedule mode must be one of {SCHEDULE_MODES}, got {mode!r}")
    allowed = {"a", "epsilon", "rho_max", "t0"} if mode == "theorem1" else {"b", "c", "r", "s", "rho_max", "t0"}
    unknown = set(params) - allowed
    if unknown:
        raise ContractViolation(f"parameters {sorted(unknown)} do not apply to {mode}")
    if not (np.isfinite(nu) and nu > 0):
        raise ContractViolation(f"nu > 0 required, got {nu!r}")
    sched = Schedule(mode=mode, nu=float(nu), **{k: (int(v) if k == "t0" else float(v)) for k, v in params.items()})
    if not 0 <= sched.rho_max < 1:
        raise ContractViolation(f"0 <= rho_max < 1 required, got {sched.rho_max}")
    if sched.t0 < 1:
        raise ContractViolation(f"t0 >= 1 required, got {sched.t0}")
    if mode == "theorem1":
        if not sched.a > 0:
            raise ContractViolation(f"a > 0 required, got {sched.a}")
        if not 0 < sched.epsilon < 0.25:
            raise ContractViolation(f"0 < epsilon < 1/4 required, got {sched.epsilon}")
    else:
        if not (sched.b > 0 and sched.c > 0):
            raise ContractViolation(f"b > 0 and c > 0 required, got b={sched.b}, c={sched.c}")
        if not sched.r >= 1:
            raise ContractViolation(f"r >= 1 required, got r={sched.r}")
        if not sched.r < sched.s:
            raise ContractViolation(f"r < s required, got r={sched.r}, s={sched.s}")
    return sched


@dataclass
class LearnerState:
    t: int
    mu: np.ndarray
    last_xi: Optional[np.ndarray] = None
    last_action: Optional[np.ndarray] = None


def _advance(game: GameDefinition, mu: np.ndarray, t: int, schedule: Schedule, kind: str, z: np.ndarray):
    """One iteration for a batch of states ``mu`` (R, N*d) given normals ``z``."""
    gamma, sigma, rho = schedule.at(t)
    xi = mu + sigma * z
    action = game.action_sets.project(xi)
    payoff = game.costs(action)
    if kind == "two_point":
        payoff = payoff - game.costs(mu)
    estimate = np.repeat(payoff, game.dim, axis=-1) * ((xi - mu) / (sigma * sigma))
    new_mu = game.action_sets.project_shrunk(mu - gamma * estimate, rho)
    # Clipping would hide an infinite estimate, so check before projection too.
    if not (np.all(np.isfinite(estimate)) and np.all(np.isfinite(new_mu))):
        _raise_non_finite(game, t, xi=xi, payoff=payoff, estimate=estimate, state=new_mu)
    return new_mu, xi, action


def _raise_non_finite(game, t, **stages):
    for stage, values in stages.items():
        values = np.atleast_2d(values)
        bad = ~np.isfinite(values)
        if np.any(bad):
            row, col = map(int, np.argwhere(bad)[0])
            player = col // game.dim if values.shape[-1] == game.joint_dim else col
            raise NonFiniteError(
                f"non-finite {stage} at t={t}, player={player}",
                value=float(values[row, col]),
                context={"t": t, "player": player, "stage": stage, "row": row},
            )


def initial_state(game: GameDefinition, schedule: Schedule, init: Union[str, Sequence[float]] = "anchor") -> LearnerState:
    """State at ``t = 1``: ``init`` projected onto ``A`` shrunk by ``rho(1)``."""
    if isinstance(init, str):
        if init != "anchor":
            raise ContractViolation(f"init must be 'anchor' or a vector, got {init!r}")
        start = game.action_sets.anchor
    else:
        start = np.asarray(init, dtype=float)
        if start.shape != (game.joint_dim,) or not np.all(np.isfinite(start)):
            raise ContractViolation(f"init must be a finite vector of length {game.joint_dim}")
    mu = game.action_sets.project_shrunk(start, float(schedule.rho(1)))
    return LearnerState(t=1, mu=mu)


def _check_kind(kind):
    if kind not in ESTIMATOR_KINDS:
        raise ContractViolation(f"estimator kind must be one of {ESTIMATOR_KINDS}, got {kind!r}")


def step(game: GameDefinition, state: LearnerState, schedule: Schedule, kind: str, key) -> LearnerState:
    """Advance one run by one iteration. ``key`` is ``(seed, run_index)``."""
    _check_kind(kind)
    seed, run_index = key
    z = iteration_normals(seed, run_index, state.t, game.n_players, game.dim)
    mu, xi, action = _advance(game, np.asarray(state.mu, dtype=float)[None, :], state.t, schedule, kind, z[None, :])
    return LearnerState(t=state.t + 1, mu=mu[0], last_xi=xi[0], last_action=action[0])


def checkpoint_times(horizon: int, count: int = 64) -> np.ndarray:
    """Distinct, geometrically spaced integers from 1 to ``horizon``."""
    if horizon < 1 or count < 1:
        raise ContractViolation("horizon and checkpoint count must be positive")
    if count == 1:
        return np.array([horizon])
    return np.unique(np.rint(np.geomspace(1, horizon, count)).astype(np.int64))


@dataclass
class BatchTrajectory:
    """Checkpointed states for several runs.

    Checkpoint ``t`` holds the state after ``t`` updates, i.e. ``mu(t+1)``,
    alongside the ``sigma``, ``rho`` and ``gamma`` used by update ``t``.
    """

    run_indices: np.ndarray
    t: np.ndarray
    mu: np.ndarray            # (R, K, N*d)
    sq_dist: np.ndarray       # (R, K)
    initial_sq_dist: np.ndarray  # (R,)
    sigma: np.ndarray
    rho: np.ndarray
    gamma: np.ndarray
    reference: np.ndarray

    def single(self, r: int = 0) -> "Trajectory":
        return Trajectory(
            t=self.t, mu=self.mu[r], sq_dist=self.sq_dist[r], initial_sq_dist=float(self.initial_sq_dist[r]),
            sigma=self.sigma, rho=self.rho, gamma=self.gamma, reference=self.reference,
            run_index=int(self.run_indices[r]),
        )


@dataclass
class Trajectory:
    t: np.ndarray
    mu: np.ndarray
    sq_dist: np.ndarray
    initial_sq_dist: float
    sigma: np.ndarray
    rho: np.ndarray
    gamma: np.ndarray
    reference: np.ndarray
    run_index: int = 0

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        arrays = ("t", "mu", "sq_dist", "sigma", "rho", "gamma", "reference")
        return (self.run_index == other.run_index
                and self.initial_sq_dist == other.initial_sq_dist
                and all(np.array_equal(getattr(self, a), getattr(other, a)) for a in arrays))


StepCallback = Callable[[int, np.ndarray, np.ndarray, np.ndarray], None]


def run_batch(game: GameDefinition, schedule: Schedule, kind: str, horizon: int, reference,
              seed: int, run_indices: Sequence[int], init="anchor", checkpoints: int = 64,
              callback: Optional[StepCallback] = None) -> BatchTrajectory:
    """Run ``horizon`` iterations for each run index, vectorised over runs.

    ``callback(t, mu_next, xi, action)`` is invoked after every update when
    given; it sees the batch arrays and must not modify them.
    """
    _check_kind(kind)
    if horizon < 1:
        raise ContractViolation(f"horizon must be at least 1, got {horizon}")
    reference = np.asarray(reference, dtype=float)
    if reference.shape != (game.joint_dim,):
        raise ContractViolation(f"reference must have length {game.joint_dim}")
    if not bool(game.action_sets.contains(reference, 1e-12)):
        raise ContractViolation("reference point must be feasible")
    run_indices = np.asarray(list(run_indices), dtype=np.int64)
    if run_indices.size == 0:
        raise ContractViolation("need at least one run index")

    times = checkpoint_times(horizon, checkpoints)
    n_runs, n = len(run_indices), game.joint_dim
    mu = np.tile(initial_state(game, schedule, init).mu, (n_runs, 1))
    initial_sq = np.sum((mu - reference) ** 2, axis=1)
    mus = np.empty((n_runs, len(times), n))
    k = 0
    block_id, z_block = -1, None
    for t in range(1, horizon + 1):
        b, row = divmod(t, BLOCK_SIZE)
        if b != block_id:
            block_id = b
            z_block = noise_block(seed, run_indices, b, game.n_players, game.dim)
        try:
            mu_next, xi, action = _advance(game, mu, t, schedule, kind, z_block[:, row, :])
        except NonFiniteError as exc:
            exc.context["run_index"] = int(run_indices[exc.context.get("row", 0)])
            raise
        if callback is not None:
            callback(t, mu_next, xi, action)
        mu = mu_next
        if t == times[k]:
            mus[:, k, :] = mu
            k += 1
    sq_dist = np.sum((mus - reference) ** 2, axis=2)
    return BatchTrajectory(
        run_indices=run_indices, t=times, mu=mus, sq_dist=sq_dist, initial_sq_dist=initial_sq,
        sigma=schedule.sigma(times), rho=schedule.rho(times), gamma=schedule.gamma(times),
        reference=reference,
    )


def run(game: GameDefinition, schedule: Schedule, kind: str, horizon: int, reference, seed: int,
        run_index: int = 0, init="anchor", checkpoints: int = 64,
        callback: Optional[StepCallback] = None) -> Trajectory:
    """Single-run trajectory; identical to that run's row in :func:`run_batch`."""
    return run_batch(game, schedule, kind, horizon, reference, seed, [run_index], init,
                     checkpoints, callback).single(0)
